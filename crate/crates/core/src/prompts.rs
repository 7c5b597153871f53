//! Prompt templates for the four model roles.
//!
//! Defaults are compiled in from `prompts/`; a directory with the same
//! layout (`<role>/<name>.md`) can override any subset of them. Templates
//! use `{{key}}` placeholders.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::Value;

const DEFAULTS: &[(&str, &str)] = &[
    ("curator/system", include_str!("../prompts/curator/system.md")),
    ("curator/user", include_str!("../prompts/curator/user.md")),
    ("executor/alfworld", include_str!("../prompts/executor/alfworld.md")),
    ("executor/webshop", include_str!("../prompts/executor/webshop.md")),
    ("executor/reasoning", include_str!("../prompts/executor/reasoning.md")),
    ("self_judge/alfworld", include_str!("../prompts/self_judge/alfworld.md")),
    ("self_judge/webshop", include_str!("../prompts/self_judge/webshop.md")),
    ("self_judge/reasoning", include_str!("../prompts/self_judge/reasoning.md")),
    ("judge/content", include_str!("../prompts/judge/content.md")),
    ("annotator/system", include_str!("../prompts/annotator/system.md")),
];

const DEFAULT_TOOLS: &str = include_str!("../prompts/curator/tools.json");

#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<String, String>,
    curator_tools: Vec<Value>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self {
            templates: DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            curator_tools: serde_json::from_str(DEFAULT_TOOLS)
                .expect("bundled tool schema is valid JSON"),
        }
    }
}

impl PromptSet {
    /// Defaults overlaid with any `<role>/<name>.md` (and
    /// `curator/tools.json`) found under `dir`.
    pub fn load_overrides(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let dir = dir.as_ref();
        let mut set = Self::default();
        for key in DEFAULTS.iter().map(|(k, _)| *k) {
            let path = dir.join(format!("{key}.md"));
            if path.is_file() {
                set.templates.insert(key.to_string(), fs::read_to_string(path)?);
            }
        }
        // Extra benchmarks can be added as new files next to the defaults.
        for role in ["executor", "self_judge"] {
            if let Ok(entries) = fs::read_dir(dir.join(role)) {
                for entry in entries.flatten() {
                    let path = entry.path();
                    if path.extension().is_some_and(|e| e == "md") {
                        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                            set.templates
                                .insert(format!("{role}/{stem}"), fs::read_to_string(&path)?);
                        }
                    }
                }
            }
        }
        let tools = dir.join("curator/tools.json");
        if tools.is_file() {
            let text = fs::read_to_string(tools)?;
            set.curator_tools = serde_json::from_str(&text)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        }
        Ok(set)
    }

    pub fn template(&self, key: &str) -> Option<&str> {
        self.templates.get(key).map(String::as_str)
    }

    pub fn curator_tools(&self) -> &[Value] {
        &self.curator_tools
    }

    /// Renders `key`, falling back to `fallback` when `key` is absent.
    pub fn render_or(&self, key: &str, fallback: &str, vars: &[(&str, &str)]) -> String {
        let template = self
            .template(key)
            .or_else(|| self.template(fallback))
            .unwrap_or_default();
        render(template, vars)
    }
}

/// Substitutes `{{name}}` placeholders. Unknown placeholders are left as is.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{{{name}}}}}"), value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_templates_load() {
        let set = PromptSet::default();
        assert!(set.template("curator/system").unwrap().contains("insert_skill"));
        let names: Vec<_> = set
            .curator_tools()
            .iter()
            .map(|t| t["function"]["name"].as_str().unwrap())
            .collect();
        assert_eq!(names, ["insert_skill", "update_skill", "delete_skill"]);
    }

    #[test]
    fn renders_placeholders() {
        assert_eq!(render("a {{x}} b {{y}}", &[("x", "1")]), "a 1 b {{y}}");
    }

    #[test]
    fn overrides_replace_defaults() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("executor")).unwrap();
        std::fs::write(dir.path().join("executor/alfworld.md"), "custom {{task}}").unwrap();
        std::fs::write(dir.path().join("executor/maze.md"), "maze {{task}}").unwrap();
        let set = PromptSet::load_overrides(dir.path()).unwrap();
        assert_eq!(set.render_or("executor/alfworld", "", &[("task", "t")]), "custom t");
        assert_eq!(set.render_or("executor/maze", "", &[("task", "t")]), "maze t");
        assert!(set.template("curator/system").is_some());
    }
}
