//! Subprocess execution with a wall-clock limit, bounded output capture and
//! optional filesystem/network confinement.
//!
//! Each child runs in its own process group so a timeout kills everything it
//! spawned. Confinement uses Landlock: the child may read and execute
//! anywhere but can only create or modify files beneath one directory, and
//! TCP bind/connect is denied. A fresh network namespace is requested on top
//! when the caller is privileged enough to get one.

use std::io::{self, Read};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::PathBuf;
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

#[derive(Debug, Clone)]
pub struct ExecSpec {
    pub program: String,
    pub args: Vec<String>,
    pub cwd: PathBuf,
    pub timeout: Duration,
    /// Bytes of stdout/stderr kept; the rest is drained and dropped.
    pub capture_limit: usize,
    /// Restrict writes to this directory and block TCP.
    pub confine_writes_to: Option<PathBuf>,
    /// Start from an empty environment (plus `PATH`, `HOME`, `LANG`).
    pub clean_env: bool,
    /// `RLIMIT_FSIZE` for the child; exceeding it raises `SIGXFSZ`.
    pub file_size_limit: Option<u64>,
}

impl ExecSpec {
    pub fn new(program: impl Into<String>, args: Vec<String>, cwd: impl Into<PathBuf>, timeout: Duration) -> Self {
        ExecSpec {
            program: program.into(),
            args,
            cwd: cwd.into(),
            timeout,
            capture_limit: 1 << 20,
            confine_writes_to: None,
            clean_env: false,
            file_size_limit: None,
        }
    }
}

#[derive(Debug)]
pub struct ExecOutcome {
    pub status: Option<ExitStatus>,
    pub timed_out: bool,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub elapsed: Duration,
}

impl ExecOutcome {
    pub fn success(&self) -> bool {
        !self.timed_out && self.status.is_some_and(|s| s.success())
    }

    /// Exit code, or `128 + signal` for signalled children.
    pub fn code(&self) -> Option<i32> {
        self.status.and_then(|s| s.code().or_else(|| s.signal().map(|sig| 128 + sig)))
    }

    /// Whether the child was killed for exceeding its file size limit.
    pub fn exceeded_file_size(&self) -> bool {
        self.status.and_then(|s| s.signal()) == Some(libc::SIGXFSZ)
    }

    pub fn stdout_text(&self) -> String {
        String::from_utf8_lossy(&self.stdout).into_owned()
    }

    pub fn stderr_text(&self) -> String {
        String::from_utf8_lossy(&self.stderr).into_owned()
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("failed to spawn `{program}`: {source}")]
    Spawn { program: String, source: io::Error },
    #[error("confinement unavailable: {0}")]
    Confinement(io::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn capture<R: Read + Send + 'static>(mut reader: R, limit: usize) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut chunk = [0u8; 8192];
        loop {
            match reader.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(k) => {
                    let room = limit.saturating_sub(kept.len());
                    kept.extend_from_slice(&chunk[..k.min(room)]);
                }
            }
        }
        kept
    })
}

pub fn run(spec: &ExecSpec) -> Result<ExecOutcome, ExecError> {
    let mut command = Command::new(&spec.program);
    command
        .args(&spec.args)
        .current_dir(&spec.cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    if spec.clean_env {
        command.env_clear();
        command.env("PATH", std::env::var("PATH").unwrap_or_else(|_| "/usr/local/bin:/usr/bin:/bin".into()));
        command.env("HOME", &spec.cwd);
        command.env("LANG", "C.UTF-8");
        command.env("PYTHONDONTWRITEBYTECODE", "1");
    }
    let ruleset = match &spec.confine_writes_to {
        Some(dir) => Some(landlock::Ruleset::writable_beneath(dir).map_err(ExecError::Confinement)?),
        None => None,
    };
    let fd = ruleset.as_ref().map(landlock::Ruleset::fd);
    let fsize = spec.file_size_limit;
    if fd.is_some() || fsize.is_some() {
        // SAFETY: the closure only issues raw syscalls (setrlimit, unshare,
        // prctl, landlock_restrict_self), all async-signal-safe, and allocates nothing.
        unsafe {
            command.pre_exec(move || {
                if let Some(limit) = fsize {
                    let rl = libc::rlimit { rlim_cur: limit, rlim_max: limit };
                    if libc::setrlimit(libc::RLIMIT_FSIZE, &rl) != 0 {
                        return Err(io::Error::last_os_error());
                    }
                }
                if let Some(fd) = fd {
                    libc::unshare(libc::CLONE_NEWNET);
                    landlock::restrict_self(fd)?;
                }
                Ok(())
            });
        }
    }

    let start = Instant::now();
    let mut child = command
        .spawn()
        .map_err(|source| ExecError::Spawn { program: spec.program.clone(), source })?;
    drop(ruleset);
    let pid = child.id() as libc::pid_t;
    let out = capture(child.stdout.take().expect("piped stdout"), spec.capture_limit);
    let err = capture(child.stderr.take().expect("piped stderr"), spec.capture_limit);

    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if start.elapsed() >= spec.timeout {
            timed_out = true;
            // SAFETY: plain kill(2) on the child's own process group.
            unsafe {
                libc::kill(-pid, libc::SIGKILL);
            }
            break child.wait().ok();
        }
        thread::sleep(Duration::from_millis(2).min(spec.timeout / 4 + Duration::from_micros(100)));
    };
    // grandchildren may still hold the pipes open; take the whole group down
    // SAFETY: as above.
    unsafe {
        libc::kill(-pid, libc::SIGKILL);
    }
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    Ok(ExecOutcome { status, timed_out, stdout, stderr, elapsed: start.elapsed() })
}

/// Whether the running kernel supports Landlock confinement.
pub fn confinement_available() -> bool {
    landlock::abi_version() > 0
}

mod landlock {
    use std::ffi::CString;
    use std::io;
    use std::os::fd::{AsRawFd, FromRawFd, OwnedFd, RawFd};
    use std::os::unix::ffi::OsStrExt;
    use std::path::Path;

    const CREATE_RULESET_VERSION: u32 = 1;
    const RULE_PATH_BENEATH: libc::c_int = 1;

    const WRITE_FILE: u64 = 1 << 1;
    const READ_FILE: u64 = 1 << 2;
    const REMOVE_DIR: u64 = 1 << 4;
    const REMOVE_FILE: u64 = 1 << 5;
    const MAKE_CHAR: u64 = 1 << 6;
    const MAKE_DIR: u64 = 1 << 7;
    const MAKE_REG: u64 = 1 << 8;
    const MAKE_SOCK: u64 = 1 << 9;
    const MAKE_FIFO: u64 = 1 << 10;
    const MAKE_BLOCK: u64 = 1 << 11;
    const MAKE_SYM: u64 = 1 << 12;
    const REFER: u64 = 1 << 13;
    const TRUNCATE: u64 = 1 << 14;

    const NET_BIND_TCP: u64 = 1 << 0;
    const NET_CONNECT_TCP: u64 = 1 << 1;
    const SCOPE_ABSTRACT_UNIX_SOCKET: u64 = 1 << 0;

    #[repr(C)]
    struct RulesetAttr {
        handled_access_fs: u64,
        handled_access_net: u64,
        scoped: u64,
    }

    #[repr(C, packed)]
    struct PathBeneathAttr {
        allowed_access: u64,
        parent_fd: i32,
    }

    pub fn abi_version() -> i64 {
        // SAFETY: version query with a null attribute, as documented.
        let v = unsafe {
            libc::syscall(libc::SYS_landlock_create_ruleset, std::ptr::null::<u8>(), 0usize, CREATE_RULESET_VERSION)
        };
        v.max(0)
    }

    pub struct Ruleset(OwnedFd);

    impl Ruleset {
        /// Deny every write-class access except beneath `dir` (and `/dev/null`).
        pub fn writable_beneath(dir: &Path) -> io::Result<Ruleset> {
            let abi = abi_version();
            if abi < 1 {
                return Err(io::Error::new(io::ErrorKind::Unsupported, "kernel lacks Landlock"));
            }
            let mut fs = WRITE_FILE
                | REMOVE_DIR
                | REMOVE_FILE
                | MAKE_CHAR
                | MAKE_DIR
                | MAKE_REG
                | MAKE_SOCK
                | MAKE_FIFO
                | MAKE_BLOCK
                | MAKE_SYM;
            if abi >= 2 {
                fs |= REFER;
            }
            if abi >= 3 {
                fs |= TRUNCATE;
            }
            let attr = RulesetAttr {
                handled_access_fs: fs,
                handled_access_net: if abi >= 4 { NET_BIND_TCP | NET_CONNECT_TCP } else { 0 },
                scoped: if abi >= 6 { SCOPE_ABSTRACT_UNIX_SOCKET } else { 0 },
            };
            let size = match abi {
                1..=3 => 8,
                4 | 5 => 16,
                _ => std::mem::size_of::<RulesetAttr>(),
            };
            // SAFETY: attr outlives the call and `size` never exceeds its layout.
            let fd = unsafe { libc::syscall(libc::SYS_landlock_create_ruleset, &attr as *const RulesetAttr, size, 0u32) };
            if fd < 0 {
                return Err(io::Error::last_os_error());
            }
            // SAFETY: the kernel just handed us this descriptor.
            let ruleset = Ruleset(unsafe { OwnedFd::from_raw_fd(fd as RawFd) });
            ruleset.allow(dir, fs)?;
            let file_rights = WRITE_FILE | if abi >= 3 { TRUNCATE } else { 0 };
            ruleset.allow(Path::new("/dev/null"), file_rights)?;
            Ok(ruleset)
        }

        fn allow(&self, path: &Path, access: u64) -> io::Result<()> {
            let c_path = CString::new(path.as_os_str().as_bytes())
                .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "path contains NUL"))?;
            // SAFETY: valid C string; O_PATH opens without touching contents.
            let raw = unsafe { libc::open(c_path.as_ptr(), libc::O_PATH | libc::O_CLOEXEC) };
            if raw < 0 {
                return Err(io::Error::last_os_error());
            }
            // SAFETY: freshly opened descriptor.
            let parent = unsafe { OwnedFd::from_raw_fd(raw) };
            let is_dir = path.is_dir();
            let allowed = if is_dir { access } else { access & (WRITE_FILE | TRUNCATE | READ_FILE) };
            let rule = PathBeneathAttr { allowed_access: allowed, parent_fd: parent.as_raw_fd() };
            // SAFETY: rule is a valid landlock_path_beneath_attr for the call's duration.
            let rc = unsafe {
                libc::syscall(
                    libc::SYS_landlock_add_rule,
                    self.0.as_raw_fd(),
                    RULE_PATH_BENEATH,
                    &rule as *const PathBeneathAttr,
                    0u32,
                )
            };
            if rc < 0 {
                return Err(io::Error::last_os_error());
            }
            Ok(())
        }

        pub fn fd(&self) -> RawFd {
            self.0.as_raw_fd()
        }
    }

    /// Apply the ruleset to the calling process. Meant for `pre_exec`.
    pub fn restrict_self(fd: RawFd) -> io::Result<()> {
        // SAFETY: raw syscalls only.
        unsafe {
            if libc::prctl(libc::PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0 {
                return Err(io::Error::last_os_error());
            }
            if libc::syscall(libc::SYS_landlock_restrict_self, fd, 0u32) != 0 {
                return Err(io::Error::last_os_error());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn sh(script: &str, dir: &Path, timeout: Duration) -> ExecSpec {
        ExecSpec::new("/bin/sh", vec!["-c".into(), script.into()], dir, timeout)
    }

    #[test]
    fn captures_stdout_and_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&sh("echo hi; exit 3", dir.path(), Duration::from_secs(5))).unwrap();
        assert_eq!(out.stdout_text(), "hi\n");
        assert_eq!(out.code(), Some(3));
        assert!(!out.success());
    }

    #[test]
    fn timeout_kills_the_group() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&sh("sleep 5 & sleep 5", dir.path(), Duration::from_millis(100))).unwrap();
        assert!(out.timed_out);
        assert!(out.elapsed < Duration::from_secs(3));
    }

    #[test]
    fn capture_is_bounded() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = sh("head -c 100000 /dev/zero", dir.path(), Duration::from_secs(5));
        spec.capture_limit = 1000;
        let out = run(&spec).unwrap();
        assert_eq!(out.stdout.len(), 1000);
        assert!(out.success());
    }

    #[test]
    fn file_size_limit_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = sh("head -c 100000 /dev/zero > big", dir.path(), Duration::from_secs(5));
        spec.file_size_limit = Some(4096);
        let out = run(&spec).unwrap();
        assert!(!out.success());
        assert!(std::fs::metadata(dir.path().join("big")).unwrap().len() <= 4096);
    }

    #[test]
    fn confined_child_cannot_write_outside() {
        if !confinement_available() {
            eprintln!("landlock unavailable; skipping");
            return;
        }
        let outer = tempfile::tempdir().unwrap();
        let inner = outer.path().join("jail");
        std::fs::create_dir(&inner).unwrap();
        let mut spec = sh("echo ok > inside.txt; echo bad > ../outside.txt", &inner, Duration::from_secs(5));
        spec.confine_writes_to = Some(inner.clone());
        let out = run(&spec).unwrap();
        assert!(inner.join("inside.txt").exists(), "{}", out.stderr_text());
        assert!(!outer.path().join("outside.txt").exists());
    }
}
