//! Texts shipped with the harness: the BlocksWorld domain, its natural-language
//! description, and the default prompt set.

pub const DOMAIN_PDDL: &str = include_str!("../assets/domain.pddl");
pub const DOMAIN_NL: &str = include_str!("../assets/domain.nl");

pub const FORMALIZER_PROMPT: &str = include_str!("../assets/prompts/formalizer.txt");
pub const PLANNER_PROMPT: &str = include_str!("../assets/prompts/planner.txt");
pub const DNC_HEADER_PROMPT: &str = include_str!("../assets/prompts/dnc_header.txt");
pub const DNC_FACT_PROMPT: &str = include_str!("../assets/prompts/dnc_fact.txt");
pub const HIGHER_ORDER_PROMPT: &str = include_str!("../assets/prompts/higher_order.txt");

/// The parsed shipped domain.
pub fn blocksworld_domain() -> crate::pddl::DomainModel {
    crate::pddl::parse_domain(DOMAIN_PDDL).expect("shipped domain parses")
}
