//! Hierarchical names and the time-sync namespace.
//!
//! A [`Name`] is an ordered list of components with a canonical text form
//! (`/`-separated, lowercase hex for hash components). Request names live
//! under `/NDNTP/time` and carry, in fixed order: optional `stratum=N` and
//! `P=p` decorations, then a random hash, a session number, and a sample
//! number. The hash exists to bypass request aggregation in forwarder PITs;
//! session and sample numbers let a client hold a conversation with one
//! server and index the time samples inside it.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Probabilities are fixed-point parts-per-million so names stay hashable
/// and draws stay integer-exact.
pub const PPM_SCALE: u32 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NameError {
    #[error("name is not under /NDNTP/time")]
    NotNdntp,
    #[error("malformed component: {0}")]
    MalformedComponent(String),
    #[error("invalid decoration: {0}")]
    InvalidDecoration(String),
}

/// One name component. Request-name components are tagged so the session,
/// sample, stratum and probability values survive round-trips exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    Label(String),
    Hash(Vec<u8>),
    Session(u64),
    Sample(u64),
    Stratum(u32),
    /// Probability in parts-per-million, `0..=1_000_000`.
    Probability(u32),
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::Label(s) => f.write_str(s),
            Component::Hash(bytes) => {
                for b in bytes {
                    write!(f, "{b:02x}")?;
                }
                Ok(())
            }
            Component::Session(n) | Component::Sample(n) => write!(f, "{n}"),
            Component::Stratum(n) => write!(f, "stratum={n}"),
            Component::Probability(ppm) => write!(f, "P={}", ppm_to_decimal(*ppm)),
        }
    }
}

/// Shortest decimal form of a ppm fraction: `300000 → "0.3"`, `1000000 → "1"`.
fn ppm_to_decimal(ppm: u32) -> String {
    let whole = ppm / PPM_SCALE;
    let frac = ppm % PPM_SCALE;
    if frac == 0 {
        return whole.to_string();
    }
    let mut digits = format!("{frac:06}");
    while digits.ends_with('0') {
        digits.pop();
    }
    format!("{whole}.{digits}")
}

/// Parses a decimal probability with at most six fractional digits into ppm.
pub fn decimal_to_ppm(text: &str) -> Result<u32, NameError> {
    let bad = || NameError::MalformedComponent(format!("P={text}"));
    let (whole, frac) = match text.split_once('.') {
        Some((w, f)) => (w, f),
        None => (text, ""),
    };
    if whole.is_empty() || whole.chars().any(|c| !c.is_ascii_digit()) {
        return Err(bad());
    }
    if frac.len() > 6 || frac.chars().any(|c| !c.is_ascii_digit()) {
        return Err(bad());
    }
    let whole: u32 = whole.parse().map_err(|_| bad())?;
    let mut frac_ppm: u32 = 0;
    if !frac.is_empty() {
        let padded = format!("{frac:0<6}");
        frac_ppm = padded.parse().map_err(|_| bad())?;
    }
    let ppm = whole
        .checked_mul(PPM_SCALE)
        .and_then(|w| w.checked_add(frac_ppm))
        .ok_or_else(bad)?;
    if ppm > PPM_SCALE {
        return Err(NameError::MalformedComponent(format!("P={text}")));
    }
    Ok(ppm)
}

/// An ordered list of components with canonical `/a/b/c` text form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Name {
    pub components: Vec<Component>,
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return f.write_str("/");
        }
        for c in &self.components {
            write!(f, "/{c}")?;
        }
        Ok(())
    }
}

impl Name {
    pub fn from_components(components: Vec<Component>) -> Self {
        Name { components }
    }

    /// `/NDNTP/time`, the prefix every time-sync name lives under.
    pub fn ndntp_prefix() -> Self {
        Name::from_components(vec![
            Component::Label("NDNTP".to_string()),
            Component::Label("time".to_string()),
        ])
    }

    /// `/NDNTP/time/stratum=<n>`, the peering prefix for one stratum tier.
    pub fn stratum_prefix(stratum: u32) -> Self {
        let mut name = Name::ndntp_prefix();
        name.components.push(Component::Stratum(stratum));
        name
    }

    /// True iff the first two components are `NDNTP`, `time`.
    pub fn is_ndntp(&self) -> bool {
        matches!(self.components.first(), Some(Component::Label(a)) if a == "NDNTP")
            && matches!(self.components.get(1), Some(Component::Label(b)) if b == "time")
    }

    /// Component-wise prefix test (`self` is a prefix of `name`).
    pub fn is_prefix_of(&self, name: &Name) -> bool {
        self.components.len() <= name.components.len()
            && self
                .components
                .iter()
                .zip(name.components.iter())
                .all(|(a, b)| a == b)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Parses canonical text form. Names under `/NDNTP/time` are re-tagged
    /// positionally so they compare equal to built ones; anything else is
    /// kept as plain labels.
    pub fn from_text(text: &str) -> Result<Name, NameError> {
        let rest = text
            .strip_prefix('/')
            .ok_or_else(|| NameError::MalformedComponent(text.to_string()))?;
        if rest.is_empty() {
            return Ok(Name::default());
        }
        let mut components = Vec::new();
        for token in rest.split('/') {
            if token.is_empty() {
                return Err(NameError::MalformedComponent("empty component".to_string()));
            }
            if let Some(v) = token.strip_prefix("stratum=") {
                let n: u32 = v
                    .parse()
                    .map_err(|_| NameError::MalformedComponent(token.to_string()))?;
                if n == 0 {
                    return Err(NameError::MalformedComponent(token.to_string()));
                }
                components.push(Component::Stratum(n));
            } else if let Some(v) = token.strip_prefix("P=") {
                components.push(Component::Probability(decimal_to_ppm(v)?));
            } else {
                components.push(Component::Label(token.to_string()));
            }
        }
        let name = Name { components };
        if name.is_ndntp() {
            retag_ndntp(name)
        } else {
            Ok(name)
        }
    }
}

/// Positionally tags the hash/session/sample tail of a `/NDNTP/time` name.
/// Prefix-only names (`/NDNTP/time`, `/NDNTP/time/stratum=2`) pass through.
fn retag_ndntp(name: Name) -> Result<Name, NameError> {
    let mut out = Vec::with_capacity(name.components.len());
    let mut iter = name.components.into_iter();
    out.push(iter.next().unwrap());
    out.push(iter.next().unwrap());

    let mut tail: Vec<Component> = Vec::new();
    let mut seen_stratum = false;
    let mut seen_prob = false;
    for c in iter.by_ref() {
        match c {
            Component::Stratum(_) if !tail.is_empty() => {
                return Err(NameError::MalformedComponent(
                    "stratum decoration after hash".to_string(),
                ))
            }
            Component::Probability(_) if !tail.is_empty() => {
                return Err(NameError::MalformedComponent(
                    "probability decoration after hash".to_string(),
                ))
            }
            Component::Stratum(n) => {
                if seen_stratum {
                    return Err(NameError::InvalidDecoration(
                        "duplicate stratum".to_string(),
                    ));
                }
                seen_stratum = true;
                out.push(Component::Stratum(n));
            }
            Component::Probability(p) => {
                if seen_prob {
                    return Err(NameError::InvalidDecoration("duplicate P".to_string()));
                }
                seen_prob = true;
                out.push(Component::Probability(p));
            }
            other => tail.push(other),
        }
    }

    match tail.len() {
        0 => Ok(Name { components: out }),
        3 => {
            let hash = match &tail[0] {
                Component::Label(s) => parse_hex(s)?,
                Component::Hash(b) => b.clone(),
                other => return Err(NameError::MalformedComponent(other.to_string())),
            };
            let session = parse_number(&tail[1])?;
            let sample = parse_number(&tail[2])?;
            out.push(Component::Hash(hash));
            out.push(Component::Session(session));
            out.push(Component::Sample(sample));
            Ok(Name { components: out })
        }
        _ => Err(NameError::MalformedComponent(format!(
            "expected hash/session/sample, found {} trailing components",
            tail.len()
        ))),
    }
}

fn parse_hex(s: &str) -> Result<Vec<u8>, NameError> {
    if s.is_empty() || !s.len().is_multiple_of(2) {
        return Err(NameError::MalformedComponent(s.to_string()));
    }
    let mut bytes = Vec::with_capacity(s.len() / 2);
    let raw = s.as_bytes();
    for pair in raw.chunks(2) {
        let hi = hex_val(pair[0]).ok_or_else(|| NameError::MalformedComponent(s.to_string()))?;
        let lo = hex_val(pair[1]).ok_or_else(|| NameError::MalformedComponent(s.to_string()))?;
        bytes.push(hi << 4 | lo);
    }
    Ok(bytes)
}

fn hex_val(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'a'..=b'f' => Some(c - b'a' + 10),
        _ => None,
    }
}

fn parse_number(c: &Component) -> Result<u64, NameError> {
    match c {
        Component::Label(s) => s
            .parse::<u64>()
            .map_err(|_| NameError::MalformedComponent(s.to_string())),
        Component::Session(n) | Component::Sample(n) => Ok(*n),
        other => Err(NameError::MalformedComponent(other.to_string())),
    }
}

/// Optional request-name decorations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Decorations {
    pub stratum: Option<u32>,
    pub probability_ppm: Option<u32>,
}

impl Decorations {
    pub fn stratum(n: u32) -> Self {
        Decorations {
            stratum: Some(n),
            probability_ppm: None,
        }
    }

    pub fn probability_ppm(ppm: u32) -> Self {
        Decorations {
            stratum: None,
            probability_ppm: Some(ppm),
        }
    }

    /// Converts a decimal probability to ppm, rejecting values outside [0, 1].
    pub fn probability(p: f64) -> Result<Self, NameError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(NameError::InvalidDecoration(format!("P={p}")));
        }
        Ok(Decorations::probability_ppm(
            (p * PPM_SCALE as f64).round() as u32
        ))
    }
}

/// Builds a canonical request name: `NDNTP, time, [stratum=N], [P=p], hash,
/// session, sample`. Decorations sit directly under the prefix so strata
/// routing can longest-prefix-match `/NDNTP/time/stratum=N`.
pub fn build_ndntp_name(
    hash: &[u8],
    session: u64,
    sample: u64,
    decorations: Decorations,
) -> Result<Name, NameError> {
    if hash.is_empty() {
        return Err(NameError::MalformedComponent("empty hash".to_string()));
    }
    let mut components = Name::ndntp_prefix().components;
    if let Some(n) = decorations.stratum {
        if n == 0 {
            return Err(NameError::InvalidDecoration("stratum=0".to_string()));
        }
        components.push(Component::Stratum(n));
    }
    if let Some(ppm) = decorations.probability_ppm {
        if ppm > PPM_SCALE {
            return Err(NameError::InvalidDecoration(format!(
                "P={}",
                ppm_to_decimal(ppm)
            )));
        }
        components.push(Component::Probability(ppm));
    }
    components.push(Component::Hash(hash.to_vec()));
    components.push(Component::Session(session));
    components.push(Component::Sample(sample));
    Ok(Name { components })
}

/// The semantic view of a full request name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedNdntpName {
    pub hash: Vec<u8>,
    pub session: u64,
    pub sample: u64,
    pub stratum: Option<u32>,
    pub probability_ppm: Option<u32>,
}

/// Extracts hash/session/sample and decorations from a request name.
pub fn parse_ndntp_name(name: &Name) -> Result<ParsedNdntpName, NameError> {
    if !name.is_ndntp() {
        return Err(NameError::NotNdntp);
    }
    let mut stratum = None;
    let mut probability = None;
    let mut tail = Vec::new();
    for c in name.components.iter().skip(2) {
        match c {
            Component::Stratum(n) => {
                if stratum.replace(*n).is_some() {
                    return Err(NameError::InvalidDecoration(
                        "duplicate stratum".to_string(),
                    ));
                }
            }
            Component::Probability(p) => {
                if probability.replace(*p).is_some() {
                    return Err(NameError::InvalidDecoration("duplicate P".to_string()));
                }
            }
            other => tail.push(other.clone()),
        }
    }
    if tail.len() != 3 {
        return Err(NameError::MalformedComponent(format!(
            "expected hash/session/sample, found {} trailing components",
            tail.len()
        )));
    }
    let hash = match &tail[0] {
        Component::Hash(b) => b.clone(),
        Component::Label(s) => parse_hex(s)?,
        other => return Err(NameError::MalformedComponent(other.to_string())),
    };
    Ok(ParsedNdntpName {
        hash,
        session: parse_number(&tail[1])?,
        sample: parse_number(&tail[2])?,
        stratum,
        probability_ppm: probability,
    })
}
