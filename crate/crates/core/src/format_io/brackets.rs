//! The coreference bracket grammar: pipe-separated items per token, each one
//! of `(id`, `id)` or `(id)`, `-` for none.

use std::collections::HashMap;

use crate::doc_model::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item<'a> {
    Open(&'a str),
    Close(&'a str),
    Single(&'a str),
}

pub fn parse_cell(cell: &str) -> Result<Vec<Item<'_>>, String> {
    if cell == "-" || cell == "_" || cell.is_empty() {
        return Ok(Vec::new());
    }
    cell.split('|')
        .map(|raw| {
            let opens = raw.starts_with('(');
            let closes = raw.ends_with(')');
            let id = raw.trim_start_matches('(').trim_end_matches(')');
            let well_formed = !id.is_empty()
                && !id.contains(['(', ')'])
                && raw.len() == id.len() + usize::from(opens) + usize::from(closes);
            if !well_formed {
                return Err(format!("malformed bracket item {raw:?}"));
            }
            Ok(match (opens, closes) {
                (true, true) => Item::Single(id),
                (true, false) => Item::Open(id),
                (false, true) => Item::Close(id),
                (false, false) => return Err(format!("bracket item {raw:?} has no bracket")),
            })
        })
        .collect()
}

/// Matches brackets across tokens with a per-id LIFO stack.
#[derive(Debug, Default)]
pub struct BracketMatcher {
    open: HashMap<String, Vec<(usize, usize)>>,
    /// Completed mentions as (id, span), in completion order.
    pub mentions: Vec<(String, Span)>,
}

impl BracketMatcher {
    /// Feeds the items of token `token` read from input line `line`.
    /// Closes are applied before singles and opens, since a mention opening
    /// and closing on the same token is always written `(id)`.
    pub fn feed(&mut self, token: usize, line: usize, items: &[Item<'_>]) -> Result<(), String> {
        for item in items {
            if let Item::Close(id) = item {
                let start = self
                    .open
                    .get_mut(*id)
                    .and_then(Vec::pop)
                    .ok_or_else(|| format!("closing bracket for {id:?} without matching open"))?
                    .0;
                self.mentions.push((id.to_string(), Span::new(start, token)));
            }
        }
        for item in items {
            match item {
                Item::Single(id) => self.mentions.push((id.to_string(), Span::new(token, token))),
                Item::Open(id) => self.open.entry(id.to_string()).or_default().push((token, line)),
                Item::Close(_) => {}
            }
        }
        Ok(())
    }

    /// Returns the line of the earliest unclosed bracket, if any.
    pub fn unclosed(&self) -> Option<(String, usize)> {
        self.open
            .iter()
            .flat_map(|(id, stack)| stack.iter().map(move |&(_, line)| (id.clone(), line)))
            .min_by_key(|(_, line)| *line)
    }
}

/// Renders per-token cells for a list of `(id, span)` mentions.
pub fn render_cells(len: usize, mentions: &[(String, Span)]) -> Vec<String> {
    let mut closes: Vec<Vec<(usize, &str)>> = vec![Vec::new(); len];
    let mut singles: Vec<Vec<&str>> = vec![Vec::new(); len];
    let mut opens: Vec<Vec<(usize, &str)>> = vec![Vec::new(); len];
    for (id, span) in mentions {
        if span.start == span.end {
            singles[span.start].push(id);
        } else {
            opens[span.start].push((span.end, id));
            closes[span.end].push((span.start, id));
        }
    }
    (0..len)
        .map(|t| {
            // innermost closes first, outermost opens first
            closes[t].sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
            opens[t].sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
            let items: Vec<String> = closes[t]
                .iter()
                .map(|(_, id)| format!("{id})"))
                .chain(singles[t].iter().map(|id| format!("({id})")))
                .chain(opens[t].iter().map(|(_, id)| format!("({id}")))
                .collect();
            if items.is_empty() {
                "-".to_string()
            } else {
                items.join("|")
            }
        })
        .collect()
}
