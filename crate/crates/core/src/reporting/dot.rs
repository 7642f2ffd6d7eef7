use std::collections::BTreeSet;
use std::fmt::Write;

use super::{highlighted_hops, ChannelRow, ReportDocument, ReportError};
use crate::model::{ChannelId, SiteId};

const MARK: &str = "color=\"red\", penwidth=3";

fn q(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Node id of the junction drawn for a multi-input or multi-output channel.
pub fn junction_node(channel: &str) -> String {
    format!("j_{channel}")
}

struct Marks(BTreeSet<(ChannelId, Option<SiteId>, SiteId)>);

impl Marks {
    fn inbound(&self, c: &ChannelId, from: &SiteId) -> bool {
        self.0
            .iter()
            .any(|(ch, f, _)| ch == c && f.as_ref() == Some(from))
    }

    fn outbound(&self, c: &ChannelId, to: &SiteId) -> bool {
        self.0.iter().any(|(ch, _, t)| ch == c && t == to)
    }

    fn edge(&self, c: &ChannelId, from: &SiteId, to: &SiteId) -> bool {
        self.0
            .iter()
            .any(|(ch, f, t)| ch == c && t == to && f.as_ref().is_none_or(|f| f == from))
    }
}

fn attrs(label: Option<&str>, marked: bool) -> String {
    let mut parts = Vec::new();
    if let Some(l) = label {
        parts.push(format!("label={}", q(l)));
    }
    if marked {
        parts.push(MARK.to_string());
    }
    if parts.is_empty() {
        String::new()
    } else {
        format!(" [{}]", parts.join(", "))
    }
}

fn channel_label(c: &ChannelRow) -> String {
    if c.name.is_empty() || c.name == c.id.as_str() {
        c.id.to_string()
    } else {
        format!("{}: {}", c.id, c.name)
    }
}

fn write_cluster(
    out: &mut String,
    doc: &ReportDocument,
    name: &str,
    depth: usize,
    index: &mut usize,
) {
    let pad = "  ".repeat(depth);
    let sub = doc.model.subnets.iter().find(|s| s.name == name);
    let _ = writeln!(out, "{pad}subgraph cluster_{index} {{");
    *index += 1;
    let _ = writeln!(out, "{pad}  label={};", q(name));
    let _ = writeln!(out, "{pad}  style=dashed;");
    if let Some(color) = sub.and_then(|s| s.color.as_deref()) {
        let _ = writeln!(out, "{pad}  color={};", q(color));
    }
    for s in doc
        .model
        .sites
        .iter()
        .filter(|s| s.subnet.as_deref() == Some(name))
    {
        let _ = writeln!(out, "{pad}  {};", q(s.id.as_str()));
    }
    for c in doc
        .channels
        .iter()
        .filter(|c| c.junction && c.subnet.as_deref() == Some(name))
    {
        let _ = writeln!(out, "{pad}  {};", q(&junction_node(c.id.as_str())));
    }
    for child in doc
        .model
        .subnets
        .iter()
        .filter(|s| s.parent.as_deref() == Some(name))
    {
        write_cluster(out, doc, &child.name, depth + 1, index);
    }
    let _ = writeln!(out, "{pad}}}");
}

/// Sites are nodes, single-input single-output channels are labelled
/// edges, every other channel is a junction node `j_<id>` with one edge
/// per input and per output. Subnets become nested clusters. With
/// `highlight`, every hop of the outcome's open paths is drawn red.
pub fn render_dot(doc: &ReportDocument, highlight: Option<&str>) -> Result<String, ReportError> {
    let marks = Marks(match highlight {
        Some(o) => highlighted_hops(doc, o)?,
        None => BTreeSet::new(),
    });
    let mut out = format!("digraph {} {{\n", q(&doc.model.name));
    out.push_str("  rankdir=LR;\n  node [shape=box];\n");
    for s in &doc.model.sites {
        let label = if s.name.is_empty() {
            s.id.as_str()
        } else {
            &s.name
        };
        let _ = writeln!(out, "  {} [label={}];", q(s.id.as_str()), q(label));
    }
    for c in doc.channels.iter().filter(|c| c.junction) {
        let _ = writeln!(
            out,
            "  {} [shape=circle, width=0.3, fixedsize=true, label={}];",
            q(&junction_node(c.id.as_str())),
            q(c.id.as_str())
        );
    }
    let names: BTreeSet<&str> = doc.model.subnets.iter().map(|s| s.name.as_str()).collect();
    let mut index = 0;
    for s in &doc.model.subnets {
        if s.parent.as_deref().is_none_or(|p| !names.contains(p)) {
            write_cluster(&mut out, doc, &s.name, 1, &mut index);
        }
    }
    for c in &doc.channels {
        if c.junction {
            let j = q(&junction_node(c.id.as_str()));
            for i in &c.inputs {
                let marked = marks.inbound(&c.id, i);
                let _ = writeln!(out, "  {} -> {j}{};", q(i.as_str()), attrs(None, marked));
            }
            for o in &c.outputs {
                let marked = marks.outbound(&c.id, o);
                let _ = writeln!(out, "  {j} -> {}{};", q(o.as_str()), attrs(None, marked));
            }
        } else {
            let (i, o) = (&c.inputs[0], &c.outputs[0]);
            let marked = marks.edge(&c.id, i, o);
            let _ = writeln!(
                out,
                "  {} -> {}{};",
                q(i.as_str()),
                q(o.as_str()),
                attrs(Some(&channel_label(c)), marked)
            );
        }
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{trace_paths, Mode, Origin};
    use crate::casestudy::load_recruitment_model;
    use crate::dsl::SourceModel;
    use crate::model::{expand_configurations, Channel, Network};
    use crate::reporting::build_report;

    #[test]
    fn one_channel() {
        let mut n = Network::default();
        n.add_channel(Channel::new("c", ["A"], ["B"]));
        let doc = build_report(&SourceModel::from_network(n), None, 10).unwrap();
        let dot = render_dot(&doc, None).unwrap();
        assert_eq!(dot.matches("[label=").count(), 3);
        assert_eq!(dot.matches(" -> ").count(), 1);
        assert!(dot.contains("\"A\" -> \"B\" [label=\"c\"];"));
    }

    #[test]
    fn clusters_and_determinism() {
        let m = load_recruitment_model().unwrap();
        let doc = build_report(&m, None, 1000).unwrap();
        let dot = render_dot(&doc, None).unwrap();
        for name in ["Sourcing", "Screening", "Client process", "AI Match"] {
            assert!(dot.contains(&format!("label=\"{name}\";")), "{name}");
        }
        assert!(!dot.contains("penwidth"));
        assert_eq!(dot, render_dot(&doc, None).unwrap());
        assert!(dot.contains("\"j_a\""));
    }

    #[test]
    fn highlight_o4_follows_trace() {
        let m = load_recruitment_model().unwrap();
        let doc = build_report(&m, None, 1000).unwrap();
        let dot = render_dot(&doc, Some("O4")).unwrap();
        let mut expected = BTreeSet::new();
        for cfg in expand_configurations(&m.network) {
            let trace = trace_paths(
                &cfg.network,
                &Origin::Channel("b6".into()),
                &"C4".into(),
                &"location_advantage".into(),
                Mode::Optimistic,
                100,
            )
            .unwrap();
            assert_eq!(trace.paths.len(), 1);
            for h in &trace.paths[0].hops {
                let c = doc.channels.iter().find(|c| c.id == h.channel).unwrap();
                let j = q(&junction_node(c.id.as_str()));
                if c.junction {
                    if let Some(f) = &h.from {
                        expected.insert(format!("{} -> {j}", q(f.as_str())));
                    }
                    expected.insert(format!("{j} -> {}", q(h.to.as_str())));
                } else {
                    expected.insert(format!(
                        "{} -> {}",
                        q(c.inputs[0].as_str()),
                        q(h.to.as_str())
                    ));
                }
            }
        }
        let marked: BTreeSet<String> = dot
            .lines()
            .filter(|l| l.contains("color=\"red\""))
            .map(|l| l.trim().split(" [").next().unwrap().to_string())
            .collect();
        assert_eq!(marked, expected);
    }

    #[test]
    fn unknown_highlight() {
        let m = load_recruitment_model().unwrap();
        let doc = build_report(&m, None, 10).unwrap();
        assert!(render_dot(&doc, Some("nope")).is_err());
    }
}
