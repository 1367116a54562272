//! Operator intent grammar:
//! `(increase|decrease) (throughput|energy efficiency|power consumption) by <number>%`,
//! case-insensitive and whitespace-tolerant.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::xapps::Kpi;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntentKpi {
    Throughput,
    EnergyEfficiency,
    PowerConsumption,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Increase,
    Decrease,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub kpi: IntentKpi,
    pub direction: Direction,
    /// Percent, in (0, 100].
    pub magnitude: f64,
    pub issued_slot: u64,
}

impl Intent {
    /// KPI the goal is expressed in; a power decrease becomes an efficiency increase.
    pub fn goal_kpi(&self) -> Kpi {
        match self.kpi {
            IntentKpi::Throughput => Kpi::Throughput,
            IntentKpi::EnergyEfficiency | IntentKpi::PowerConsumption => Kpi::EnergyEfficiency,
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = match self.direction {
            Direction::Increase => "increase",
            Direction::Decrease => "decrease",
        };
        let kpi = match self.kpi {
            IntentKpi::Throughput => "throughput",
            IntentKpi::EnergyEfficiency => "energy efficiency",
            IntentKpi::PowerConsumption => "power consumption",
        };
        write!(f, "{dir} {kpi} by {}%", self.magnitude)
    }
}

pub const GRAMMAR_HINT: &str =
    "expected: (increase|decrease) (throughput|energy efficiency|power consumption) by <number>%";

struct Token<'a> {
    text: &'a str,
    offset: usize,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token { text: &text[s..i], offset: s });
            }
        } else if ch == '%' {
            if let Some(s) = start.take() {
                out.push(Token { text: &text[s..i], offset: s });
            }
            out.push(Token { text: &text[i..i + 1], offset: i });
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &text[s..], offset: s });
    }
    out
}

pub fn parse_intent(text: &str, issued_slot: u64) -> Result<Intent> {
    let toks = tokenize(text);
    let err = |i: usize, msg: &str| {
        let offset = toks.get(i).map(|t| t.offset).unwrap_or(text.len());
        Error::IntentParse { token: i + 1, offset, message: format!("{msg}; {GRAMMAR_HINT}") }
    };
    let word = |i: usize| toks.get(i).map(|t| t.text.to_ascii_lowercase());

    let direction = match word(0).as_deref() {
        Some("increase") => Direction::Increase,
        Some("decrease") => Direction::Decrease,
        _ => return Err(err(0, "expected 'increase' or 'decrease'")),
    };
    let (kpi, mut i) = match word(1).as_deref() {
        Some("throughput") => (IntentKpi::Throughput, 2),
        Some("energy") if word(2).as_deref() == Some("efficiency") => (IntentKpi::EnergyEfficiency, 3),
        Some("energy") => return Err(err(2, "expected 'efficiency'")),
        Some("power") if word(2).as_deref() == Some("consumption") => (IntentKpi::PowerConsumption, 3),
        Some("power") => return Err(err(2, "expected 'consumption'")),
        _ => return Err(err(1, "expected a KPI")),
    };
    if word(i).as_deref() != Some("by") {
        return Err(err(i, "expected 'by'"));
    }
    i += 1;
    let magnitude: f64 = match toks.get(i).map(|t| t.text.parse::<f64>()) {
        Some(Ok(v)) if v.is_finite() => v,
        _ => return Err(err(i, "expected a number")),
    };
    let num_tok = i;
    i += 1;
    if word(i).as_deref() != Some("%") {
        return Err(err(i, "expected '%'"));
    }
    i += 1;
    if i < toks.len() {
        return Err(err(i, "unexpected trailing input"));
    }
    if magnitude <= 0.0 || magnitude > 100.0 {
        return Err(Error::domain(format!(
            "intent magnitude {magnitude}% (token {}) must be in (0, 100]",
            num_tok + 1
        )));
    }
    let supported = matches!(
        (kpi, direction),
        (IntentKpi::Throughput, Direction::Increase)
            | (IntentKpi::EnergyEfficiency, Direction::Increase)
            | (IntentKpi::PowerConsumption, Direction::Decrease)
    );
    if !supported {
        return Err(Error::domain(format!(
            "unsupported intent '{}': only throughput or energy efficiency increases and power consumption decreases can be pursued",
            text.trim()
        )));
    }
    Ok(Intent { kpi, direction, magnitude, issued_slot })
}
