//! Keyword heuristics that tag a design with the constructs it contains.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::lexer::{is_keyword, tokenize, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construct {
    Fsm,
    Bus,
    Debug,
    Crypto,
    AccessControl,
    Reset,
}

impl Construct {
    pub const ALL: [Construct; 6] = [
        Construct::Fsm,
        Construct::Bus,
        Construct::Debug,
        Construct::Crypto,
        Construct::AccessControl,
        Construct::Reset,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Construct::Fsm => "fsm",
            Construct::Bus => "bus",
            Construct::Debug => "debug",
            Construct::Crypto => "crypto",
            Construct::AccessControl => "access_control",
            Construct::Reset => "reset",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

/// Splits an identifier on `_`, digits-to-letters and camelCase boundaries,
/// lowercased: `dbg_rdata` → [dbg, rdata], `isHashValid` → [is, hash, valid].
pub fn identifier_words(ident: &str) -> Vec<String> {
    let mut words = Vec::new();
    for part in ident.split(['_', '$', '\\']) {
        let mut cur = String::new();
        let chars: Vec<char> = part.chars().collect();
        for (i, &c) in chars.iter().enumerate() {
            let boundary = i > 0
                && c.is_ascii_uppercase()
                && (chars[i - 1].is_ascii_lowercase()
                    || chars[i - 1].is_ascii_digit()
                    || chars.get(i + 1).is_some_and(|n| n.is_ascii_lowercase()) && chars[i - 1].is_ascii_uppercase());
            if boundary && !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
            cur.push(c.to_ascii_lowercase());
        }
        if !cur.is_empty() {
            words.push(cur);
        }
    }
    words
}

fn word_tags(word: &str) -> impl Iterator<Item = Construct> + '_ {
    const DEBUG: &[&str] = &["dbg", "debug", "jtag", "tap", "dmi"];
    const CRYPTO: &[&str] =
        &["key", "keys", "hash", "cipher", "aes", "sha", "hmac", "rsa", "ecc", "sm4", "trng", "nonce"];
    const CRYPTO_PREFIX: &[&str] = &["crypt", "encrypt", "decrypt", "cipher"];
    const RESET: &[&str] = &["rst", "rstn", "nrst", "reset", "resetn", "rst_n"];
    const ACCESS_PREFIX: &[&str] = &["priv", "lock", "unlock", "grant", "perm"];
    const BUS: &[&str] =
        &["addr", "wdata", "rdata", "axi", "ahb", "apb", "bus", "wishbone", "wb", "haddr", "paddr", "awaddr", "araddr"];
    Construct::ALL.into_iter().filter(move |c| match c {
        Construct::Debug => DEBUG.contains(&word),
        Construct::Crypto => CRYPTO.contains(&word) || CRYPTO_PREFIX.iter().any(|p| word.starts_with(p)),
        Construct::Reset => RESET.contains(&word),
        Construct::AccessControl => ACCESS_PREFIX.iter().any(|p| word.starts_with(p)),
        Construct::Bus => BUS.contains(&word),
        Construct::Fsm => false,
    })
}

/// Which identifiers triggered each tag. Deterministic (sorted).
pub fn construct_evidence(src: &str) -> Vec<(Construct, BTreeSet<String>)> {
    let Ok(toks) = tokenize(src) else {
        return Vec::new();
    };
    let mut hits: Vec<(Construct, BTreeSet<String>)> = Construct::ALL.iter().map(|c| (*c, BTreeSet::new())).collect();
    let mut has_case = false;
    let mut state_idents = BTreeSet::new();
    for t in &toks {
        if t.kind != TokenKind::Ident {
            continue;
        }
        if matches!(t.text.as_str(), "case" | "casez" | "casex" | "unique" | "priority") {
            has_case |= t.text.starts_with("case");
            continue;
        }
        if is_keyword(&t.text) {
            continue;
        }
        let words = identifier_words(&t.text);
        if words.iter().any(|w| w.contains("state") || w == "fsm") {
            state_idents.insert(t.text.clone());
        }
        for w in &words {
            for c in word_tags(w) {
                hits.iter_mut().find(|(k, _)| *k == c).unwrap().1.insert(t.text.clone());
            }
        }
    }
    if has_case && !state_idents.is_empty() {
        hits.iter_mut().find(|(k, _)| *k == Construct::Fsm).unwrap().1 = state_idents;
    }
    hits.retain(|(_, s)| !s.is_empty());
    hits
}

pub fn scan_constructs(src: &str) -> BTreeSet<Construct> {
    construct_evidence(src).into_iter().map(|(c, _)| c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words() {
        assert_eq!(identifier_words("dbg_rdata"), ["dbg", "rdata"]);
        assert_eq!(identifier_words("isHashValid"), ["is", "hash", "valid"]);
        assert_eq!(identifier_words("TRNG_CTRL_EN"), ["trng", "ctrl", "en"]);
        assert_eq!(identifier_words("AXIAddr"), ["axi", "addr"]);
    }

    #[test]
    fn fsm_needs_case_and_state() {
        let s = "module m(input clk, input rst_n); reg [1:0] currentState; always @* case (currentState) default: ; endcase endmodule";
        let c = scan_constructs(s);
        assert!(c.contains(&Construct::Fsm));
        assert!(c.contains(&Construct::Reset));
        assert!(!scan_constructs("module m; reg state; endmodule").contains(&Construct::Fsm));
    }

    #[test]
    fn word_based_not_substring() {
        // "clock" must not count as a lock, "keyboard" is not a key.
        let c = scan_constructs("module m(input clock, input keyboard); endmodule");
        assert!(c.is_empty(), "{c:?}");
        let c = scan_constructs("module m(input dbg_sel, input priv_lvl); endmodule");
        assert!(c.contains(&Construct::Debug) && c.contains(&Construct::AccessControl));
    }

    #[test]
    fn comments_ignored() {
        assert!(scan_constructs("// jtag debug key\nmodule m; endmodule").is_empty());
        assert!(scan_constructs("").is_empty());
    }
}
