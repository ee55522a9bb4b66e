use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use regex::Regex;
use svw_llm::{render_template, ChatRequest, Gateway, MockBackend, PromptTemplate, TemplateRegistry};

#[derive(Debug, Clone)]
enum Piece {
    Text(String),
    Var(String),
    Open,
    Close,
}

fn piece() -> impl Strategy<Value = Piece> {
    prop_oneof![
        "[a-zA-Z0-9 .,:;\n-]{0,12}".prop_map(Piece::Text),
        "[a-c]".prop_map(Piece::Var),
        Just(Piece::Open),
        Just(Piece::Close),
    ]
}

fn body(pieces: &[Piece]) -> String {
    pieces
        .iter()
        .map(|p| match p {
            Piece::Text(t) => t.clone(),
            Piece::Var(v) => format!("{{{v}}}"),
            Piece::Open => "{{".into(),
            Piece::Close => "}}".into(),
        })
        .collect()
}

proptest! {
    #[test]
    fn rendered_output_has_no_placeholders(
        pieces in prop::collection::vec(piece(), 0..20),
        values in prop::collection::vec("[a-z ]{0,8}", 3),
    ) {
        let t = PromptTemplate::new("t", body(&pieces)).unwrap();
        let vars: BTreeMap<String, String> = ["a", "b", "c"]
            .iter()
            .zip(&values)
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect();
        let out = render_template(&t, &vars).unwrap();
        // Literal braces only come from escapes, so with brace-free values the
        // output never contains a `{name}` placeholder.
        let placeholder = Regex::new(r"\{[A-Za-z_][A-Za-z0-9_]*\}").unwrap();
        let escapes_only = pieces.iter().all(|p| !matches!(p, Piece::Open | Piece::Close));
        if escapes_only {
            prop_assert!(!placeholder.is_match(&out));
        }
        let expected: Vec<&str> = {
            let mut seen = Vec::new();
            for p in &pieces {
                if let Piece::Var(v) = p {
                    if !seen.contains(&v.as_str()) {
                        seen.push(v.as_str());
                    }
                }
            }
            seen
        };
        prop_assert_eq!(t.required_variables.iter().map(String::as_str).collect::<Vec<_>>(), expected);
    }

    #[test]
    fn mock_is_deterministic(query in "[a-zA-Z ?]{1,40}", reply in "[a-z: ]{1,20}") {
        let mock = Arc::new(MockBackend::new());
        mock.script_any("intent_detect", &reply);
        let gw = Gateway::with_builtin_templates().with_backend("mock", mock.clone());
        let req = ChatRequest::new("intent_detect")
            .var("query", query.clone())
            .var("attachments", "none");
        let a = gw.complete("mock", &req).unwrap();
        let b = gw.complete("mock", &req).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.text, reply);
        let calls = mock.calls();
        prop_assert_eq!(&calls[0], &calls[1]);
    }
}

#[test]
fn builtin_templates_render_with_their_own_variables() {
    let reg = TemplateRegistry::builtin();
    for id in reg.ids() {
        let t = reg.get(id).unwrap();
        let vars = t.required_variables.iter().map(|n| (n.clone(), format!("<{n}>"))).collect();
        let out = render_template(t, &vars).unwrap();
        for n in &t.required_variables {
            assert!(out.contains(&format!("<{n}>")), "{id} lost {n}");
        }
    }
}
