use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::error::TemplateError;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Var(String),
}

/// A prompt body with `{name}` placeholders. `{{` and `}}` render as literal
/// braces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: String,
    pub body: String,
    /// Placeholder names in first-appearance order, deduplicated.
    pub required_variables: Vec<String>,
    segments: Vec<Segment>,
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn parse_segments(template_id: &str, body: &str) -> Result<Vec<Segment>, TemplateError> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut chars = body.char_indices().peekable();
    while let Some((offset, c)) = chars.next() {
        match c {
            '{' => {
                if matches!(chars.peek(), Some((_, '{'))) {
                    chars.next();
                    literal.push('{');
                    continue;
                }
                let mut name = String::new();
                let mut closed = false;
                while let Some(&(_, n)) = chars.peek() {
                    if n == '}' {
                        chars.next();
                        closed = true;
                        break;
                    }
                    let valid = if name.is_empty() { is_name_start(n) } else { is_name_char(n) };
                    if !valid {
                        break;
                    }
                    name.push(n);
                    chars.next();
                }
                if !closed || name.is_empty() {
                    return Err(TemplateError::Malformed {
                        template_id: template_id.to_string(),
                        offset,
                        message: "`{` must open a `{name}` placeholder or be escaped as `{{`".into(),
                    });
                }
                if !literal.is_empty() {
                    segments.push(Segment::Literal(std::mem::take(&mut literal)));
                }
                segments.push(Segment::Var(name));
            }
            '}' => {
                if matches!(chars.peek(), Some((_, '}'))) {
                    chars.next();
                }
                literal.push('}');
            }
            _ => literal.push(c),
        }
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    Ok(segments)
}

impl PromptTemplate {
    pub fn new(template_id: impl Into<String>, body: impl Into<String>) -> Result<Self, TemplateError> {
        let template_id = template_id.into();
        let body = body.into();
        let segments = parse_segments(&template_id, &body)?;
        let mut seen = BTreeSet::new();
        let required_variables = segments
            .iter()
            .filter_map(|s| match s {
                Segment::Var(n) if seen.insert(n.clone()) => Some(n.clone()),
                _ => None,
            })
            .collect();
        Ok(Self { template_id, body, required_variables, segments })
    }

    pub fn render(&self, variables: &BTreeMap<String, String>) -> Result<String, TemplateError> {
        render_template(self, variables)
    }
}

/// Substitutes every placeholder. Extra bindings are ignored.
pub fn render_template(
    template: &PromptTemplate,
    variables: &BTreeMap<String, String>,
) -> Result<String, TemplateError> {
    if let Some(missing) = template.required_variables.iter().find(|n| !variables.contains_key(n.as_str())) {
        return Err(TemplateError::MissingVariable {
            template_id: template.template_id.clone(),
            name: missing.clone(),
        });
    }
    let mut out = String::with_capacity(template.body.len());
    for seg in &template.segments {
        match seg {
            Segment::Literal(s) => out.push_str(s),
            Segment::Var(n) => out.push_str(&variables[n]),
        }
    }
    Ok(out)
}

macro_rules! builtin {
    ($($id:literal),* $(,)?) => {
        &[$(($id, include_str!(concat!("../prompts/", $id, ".txt")))),*]
    };
}

/// Every template the agents use. Bodies live in `prompts/<id>.txt`.
const BUILTIN: &[(&str, &str)] = builtin![
    "follow_up",
    "intent_detect",
    "chat_intent",
    "query_optimize",
    "chat_answer",
    "chat_feedback",
    "extract_hierarchy",
    "summarize_module",
    "generate_assets",
    "assets_reformat",
    "critique_assets",
    "select_flow",
    "threat_questions",
    "threat_relevance",
    "policy_extract",
    "test_plan",
    "vuln_analyze",
    "vuln_reformat",
    "scenario_draft",
    "scenario_critic",
    "testbench_generate",
    "classify_design",
    "property_generate",
    "property_reformat",
    "property_repair",
];

#[derive(Debug, Clone, Default)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, Arc<PromptTemplate>>,
}

impl TemplateRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut reg = Self::new();
        for (id, body) in BUILTIN {
            let t = PromptTemplate::new(*id, *body).expect("builtin templates are well formed");
            reg.insert(t);
        }
        reg
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.template_id.clone(), Arc::new(template));
    }

    pub fn get(&self, template_id: &str) -> Option<&PromptTemplate> {
        self.templates.get(template_id).map(|t| t.as_ref())
    }

    pub fn contains(&self, template_id: &str) -> bool {
        self.templates.contains_key(template_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}
