/// Removes a surrounding Markdown code fence (```json ... ```) if present.
///
/// Models asked for bare JSON still wrap it in fences often enough that the
/// parser strips them defensively. Any prose before the fence is dropped too.
pub fn strip_code_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(open) = t.find("```") else {
        return t;
    };
    let after = &t[open + 3..];
    // skip an info string such as `json`
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    match body.rfind("```") {
        Some(close) => body[..close].trim(),
        None => body.trim(),
    }
}

#[cfg(test)]
mod tests {
    use super::strip_code_fences;

    #[test]
    fn fences() {
        assert_eq!(strip_code_fences("{\"a\":1}"), "{\"a\":1}");
        assert_eq!(strip_code_fences("```json\n{\"a\":1}\n```"), "{\"a\":1}");
        assert_eq!(strip_code_fences("Here you go:\n```\n[1]\n```\n"), "[1]");
        assert_eq!(strip_code_fences("  ```json\n{}"), "{}");
    }
}
