//! Versioned prompt assets. Changing any of them requires bumping
//! [`PROMPT_VERSION`] so resumed runs re-extract.

pub const PROMPT_VERSION: &str = "v1";

pub const GATEKEEPER: &str = include_str!("../../prompts/gatekeeper.v1.txt");
pub const ANALYST: &str = include_str!("../../prompts/analyst.v1.txt");
pub const REPAIR: &str = include_str!("../../prompts/repair.v1.txt");
pub const RECORD_SCHEMA: &str = include_str!("../../prompts/record.schema.json");

pub fn analyst_system_prompt() -> String {
    ANALYST.replace("{{SCHEMA}}", RECORD_SCHEMA.trim())
}

pub fn repair_instructions(errors: &[String], previous: &str) -> String {
    let lines: Vec<String> = errors.iter().map(|e| format!("- {e}")).collect();
    REPAIR.replace("{{ERRORS}}", &lines.join("\n")).replace("{{PREVIOUS}}", previous)
}
