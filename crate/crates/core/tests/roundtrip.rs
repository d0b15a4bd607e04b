mod common;

use blendtext::{format_model, from_eaxml, to_eaxml, ModelElement};
use common::*;
use proptest::prelude::*;
use proptest::sample::Index;
use std::sync::OnceLock;

fn lang() -> &'static Lang {
    static LANG: OnceLock<Lang> = OnceLock::new();
    LANG.get_or_init(Lang::new)
}

fn reparse(text: &str) -> ModelElement {
    let parsed = lang().syntax().parse(text);
    assert!(parsed.diagnostics.is_empty(), "{:?}\n{text}", parsed.diagnostics);
    parsed.root.unwrap()
}

/// Rewrites canonical text with arbitrary whitespace between tokens.
fn reflow(text: &str, seps: &[Index]) -> String {
    let choices = [" ", "\n", "\t", "  \n\n ", " // note\n"];
    let mut out = String::new();
    let mut k = 0;
    for line in text.lines() {
        for word in split_outside_strings(line.trim()) {
            out.push_str(&word);
            out.push_str(choices[seps[k % seps.len()].index(choices.len())]);
            k += 1;
        }
    }
    out
}

fn split_outside_strings(line: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut in_string = false;
    let mut escaped = false;
    for c in line.chars() {
        if in_string {
            cur.push(c);
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
        } else if c == ' ' {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
        } else {
            in_string |= c == '"';
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words
}

#[test]
fn fixtures_are_canonical() {
    for (name, text) in fixtures() {
        let m = reparse(&text);
        assert_eq!(format_model(&m, &lang().g).unwrap(), text, "{name}");
    }
}

#[test]
fn xml_goldens_match() {
    for name in ["wiper", "comments"] {
        let text = std::fs::read_to_string(fixture_dir().join(format!("{name}.eatxt"))).unwrap();
        let xml = to_eaxml(&reparse(&text), &lang().mm).unwrap();
        assert_eq!(xml, golden(&format!("{name}.eaxml")), "{name}");
    }
}

#[test]
fn xml_keeps_string_escapes_readable() {
    let text = std::fs::read_to_string(fixture_dir().join("comments.eatxt")).unwrap();
    let xml = to_eaxml(&reparse(&text), &lang().mm).unwrap();
    assert!(xml.contains(r#"<BODY>Quotes "inside" and a back\slash</BODY>"#));
    assert!(xml.contains("line one\nline two\ttabbed"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn printed_models_parse_back_equal(m in arb_model(lang(), 80)) {
        let text = format_model(&m, &lang().g).unwrap();
        prop_assert_eq!(reparse(&text), m);
    }

    #[test]
    fn formatting_is_a_fixpoint(m in arb_model(lang(), 80)) {
        let once = format_model(&m, &lang().g).unwrap();
        let twice = format_model(&reparse(&once), &lang().g).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn layout_does_not_matter(m in arb_model(lang(), 40), seps in prop::collection::vec(any::<Index>(), 1..16)) {
        let canonical = format_model(&m, &lang().g).unwrap();
        let messy = reflow(&canonical, &seps);
        prop_assert_eq!(format_model(&reparse(&messy), &lang().g).unwrap(), canonical);
    }

    #[test]
    fn xml_roundtrip_is_identity(m in arb_model(lang(), 80)) {
        let xml = to_eaxml(&m, &lang().mm).unwrap();
        let (back, diags) = from_eaxml(&xml, &lang().mm).unwrap();
        prop_assert!(diags.is_empty(), "{:?}", diags);
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(to_eaxml(&back, &lang().mm).unwrap(), xml);
    }

    #[test]
    fn child_order_survives_xml(
        m in arb_model(lang(), 60),
        swaps in prop::collection::vec(any::<(Index, Index)>(), 1..12),
    ) {
        let mut permuted = m;
        permute_children(&mut permuted, &swaps);
        let (back, _) = from_eaxml(&to_eaxml(&permuted, &lang().mm).unwrap(), &lang().mm).unwrap();
        let order = |e: &ModelElement| e.iter().map(|x| (x.class_name.clone(), x.short_name.clone())).collect::<Vec<_>>();
        prop_assert_eq!(order(&back), order(&permuted));
    }
}
