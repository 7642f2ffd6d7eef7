use std::fmt::Write;

use super::FORMAT_VERSION;
use crate::analysis::{ImpactSpec, OutcomeSpec};
use crate::model::{
    is_valid_identifier, Carry, Channel, Conclusion, Condition, Network, OutputFlow, Site,
    TagSelection, Toggle,
};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Bare when the text is an identifier, quoted otherwise.
fn label(s: &str) -> String {
    if is_valid_identifier(s) {
        s.to_string()
    } else {
        quote(s)
    }
}

fn join<T: AsRef<str>>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|s| s.as_ref().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

struct Out {
    buf: String,
    indent: usize,
}

impl Out {
    fn line(&mut self, s: &str) {
        for _ in 0..self.indent {
            self.buf.push_str("  ");
        }
        self.buf.push_str(s);
        self.buf.push('\n');
    }

    fn blank(&mut self) {
        if !self.buf.is_empty() && !self.buf.ends_with("{\n") && !self.buf.ends_with("\n\n") {
            self.buf.push('\n');
        }
    }
}

/// Canonical text of a model. Byte-deterministic: every collection is
/// written in sorted or declaration order.
pub fn serialize(network: &Network, outcomes: &[OutcomeSpec], impacts: &[ImpactSpec]) -> String {
    let mut out = Out {
        buf: String::new(),
        indent: 0,
    };
    out.line(&format!("ifm {FORMAT_VERSION};"));
    write_network(&mut out, network);
    if !network.alternatives.is_empty() {
        out.blank();
        for alt in network.alternatives.values() {
            out.line(&format!("alt {} {{", alt.id));
            out.indent += 1;
            for v in &alt.variants {
                out.line(&format!("variant {} {{", v.name));
                out.indent += 1;
                for t in &v.present {
                    out.line(&match t {
                        Toggle::Edge { channel, input } => format!("edge {input} -> {channel};"),
                        Toggle::Channel { channel } => format!("channel {channel};"),
                        Toggle::Mitigation {
                            channel,
                            mitigation,
                        } => format!("mitigation {channel} {};", label(mitigation)),
                    });
                }
                out.indent -= 1;
                out.line("}");
            }
            if alt.includes_absent {
                out.line("absent;");
            }
            out.indent -= 1;
            out.line("}");
        }
    }
    let mut sorted: Vec<&OutcomeSpec> = outcomes.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for o in sorted {
        out.blank();
        out.line(&format!("outcome {} {{", o.id));
        out.indent += 1;
        if !o.description.is_empty() {
            out.line(&format!("description {};", quote(&o.description)));
        }
        out.line(&format!("target {};", o.target));
        out.line(&format!("tags {};", join(&o.tags)));
        if !o.from.is_empty() {
            out.line(&format!("from {};", join(&o.from)));
        }
        if let Some(v) = &o.via {
            out.line(&format!("via {};", label(v)));
        }
        if !o.note.is_empty() {
            out.line(&format!("note {};", quote(&o.note)));
        }
        out.indent -= 1;
        out.line("}");
    }
    let mut sorted: Vec<&ImpactSpec> = impacts.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for i in sorted {
        out.blank();
        out.line(&format!("impact {} {{", i.id));
        out.indent += 1;
        if !i.description.is_empty() {
            out.line(&format!("description {};", quote(&i.description)));
        }
        if !i.outcomes.is_empty() {
            out.line(&format!("outcomes {};", join(&i.outcomes)));
        }
        for p in &i.paths {
            out.line(&format!("path {};", join(p)));
        }
        if !i.note.is_empty() {
            out.line(&format!("note {};", quote(&i.note)));
        }
        out.indent -= 1;
        out.line("}");
    }
    out.buf
}

fn write_network(out: &mut Out, n: &Network) {
    if !n.name.is_empty() {
        out.line(&format!("network {};", quote(&n.name)));
    }
    if !n.tags.is_empty() {
        out.blank();
        out.line("tags {");
        out.indent += 1;
        for t in &n.tags {
            out.line(&format!("{t},"));
        }
        out.indent -= 1;
        out.line("}");
    }
    let ts = &n.type_system;
    if !ts.types.is_empty() || !ts.subtypes.is_empty() {
        out.blank();
        out.line("types {");
        out.indent += 1;
        let mut named: std::collections::BTreeSet<_> = ts.types.iter().collect();
        named.extend(ts.subtypes.iter().map(|(s, _)| s));
        for t in named {
            let sups: Vec<&str> = ts
                .subtypes
                .iter()
                .filter(|(s, _)| s == t)
                .map(|(_, p)| p.as_str())
                .collect();
            if sups.is_empty() {
                out.line(&format!("{t};"));
            } else {
                out.line(&format!("{t} < {};", join(sups)));
            }
        }
        out.indent -= 1;
        out.line("}");
    }
    for r in ts.rules.values() {
        out.blank();
        out.line(&format!("rule {} {{", r.name));
        out.indent += 1;
        let conds: Vec<String> = r
            .conditions
            .iter()
            .map(|c| match c {
                Condition::ChannelHasType(t) => format!("channel {t}"),
                Condition::InputHasType(t) => format!("input {t}"),
                Condition::OutputHasType(t) => format!("output {t}"),
            })
            .collect();
        out.line(&format!("when {};", conds.join(", ")));
        out.line(&match &r.conclusion {
            Conclusion::Channel(t) => format!("then channel {t};"),
            Conclusion::Output { position: None, ty } => format!("then output {ty};"),
            Conclusion::Output {
                position: Some(p),
                ty,
            } => format!("then output {p} {ty};"),
        });
        out.indent -= 1;
        out.line("}");
    }
    if !n.subnets.is_empty() {
        out.blank();
        for s in n.subnets.values() {
            let mut props = Vec::new();
            if let Some(p) = &s.parent {
                props.push(format!("parent {};", label(p)));
            }
            if let Some(a) = &s.abstract_id {
                props.push(format!("abstract {a};"));
            }
            if let Some(c) = &s.color {
                props.push(format!("color {};", quote(c)));
            }
            if props.is_empty() {
                out.line(&format!("subnet {};", label(&s.name)));
            } else {
                out.line(&format!("subnet {} {{", label(&s.name)));
                out.indent += 1;
                for p in props {
                    out.line(&p);
                }
                out.indent -= 1;
                out.line("}");
            }
        }
    }
    if !n.sites.is_empty() {
        out.blank();
        for s in n.sites.values() {
            write_site(out, s);
        }
    }
    for c in n.channels.values() {
        out.blank();
        write_channel(out, c);
    }
}

fn write_site(out: &mut Out, s: &Site) {
    let mut props = Vec::new();
    if !s.name.is_empty() {
        props.push(format!("name {};", quote(&s.name)));
    }
    if !s.types.is_empty() {
        props.push(format!("type {};", join(&s.types)));
    }
    if let Some(a) = &s.actor {
        props.push(format!("actor {a};"));
    }
    if let Some(sub) = &s.subnet {
        props.push(format!("subnet {};", label(sub)));
    }
    if !s.seeds.is_empty() {
        props.push(format!("seed {};", join(&s.seeds)));
    }
    if props.is_empty() {
        out.line(&format!("site {};", s.id));
        return;
    }
    out.line(&format!("site {} {{", s.id));
    out.indent += 1;
    for p in props {
        out.line(&p);
    }
    out.indent -= 1;
    out.line("}");
}

fn write_channel(out: &mut Out, c: &Channel) {
    out.line(&format!("channel {} {{", c.id));
    out.indent += 1;
    if !c.name.is_empty() {
        out.line(&format!("name {};", quote(&c.name)));
    }
    if !c.operation.is_empty() {
        out.line(&format!("operation {};", quote(&c.operation)));
    }
    out.line(&format!(
        "from {} -> {};",
        join(&c.inputs),
        join(&c.outputs)
    ));
    if !c.types.is_empty() {
        out.line(&format!("type {};", join(&c.types)));
    }
    if let Some(a) = &c.actor {
        out.line(&format!("actor {a};"));
    }
    if let Some(sub) = &c.subnet {
        out.line(&format!("subnet {};", label(sub)));
    }
    if !c.bias_kinds.is_empty() {
        let kinds: Vec<String> = c.bias_kinds.iter().map(|k| label(k)).collect();
        out.line(&format!("bias {};", kinds.join(", ")));
    }
    let qualify = c.outputs.len() > 1;
    for (site, flow) in &c.flow.outputs {
        let at = if qualify {
            format!(" @ {site}")
        } else {
            String::new()
        };
        write_flow(out, flow, &at);
    }
    if let Some(def) = &c.definition {
        out.line("defined-by {");
        out.indent += 1;
        write_network(out, def);
        out.indent -= 1;
        out.line("}");
    }
    out.indent -= 1;
    out.line("}");
}

fn write_flow(out: &mut Out, flow: &OutputFlow, at: &str) {
    match &flow.carries {
        Carry::All => {}
        Carry::Explicit(map) if map.is_empty() => out.line(&format!("carry none{at};")),
        Carry::Explicit(map) => {
            for (input, sel) in map {
                out.line(&match sel {
                    TagSelection::All => format!("carry {input} *{at};"),
                    TagSelection::Tags(t) => format!("carry {input} [{}]{at};", join(t)),
                });
            }
        }
        Carry::Summary(entries) => {
            for e in entries {
                let mut s = String::from("summary ");
                match (&e.input, &e.from) {
                    (Some(i), Some(f)) => {
                        let _ = write!(s, "from {i} {f}");
                    }
                    _ => s.push_str("introduced"),
                }
                if !e.via.is_empty() {
                    let _ = write!(s, " via {}", join(&e.via));
                }
                let _ = write!(s, " -> {}", e.to);
                if e.conditional {
                    s.push_str(" conditional");
                }
                let _ = write!(s, "{at};");
                out.line(&s);
            }
        }
    }
    for m in flow.drops.values() {
        let mut s = format!("drop {}", join(&m.tags));
        s.push_str(if m.conditional {
            " conditional"
        } else {
            " unconditional"
        });
        let _ = write!(s, " {}", quote(&m.id));
        if !m.note.is_empty() {
            let _ = write!(s, " note {}", quote(&m.note));
        }
        let _ = write!(s, "{at};");
        out.line(&s);
    }
    for i in &flow.introduces {
        if i.kind.is_empty() {
            out.line(&format!("introduce {}{at};", i.tag));
        } else {
            out.line(&format!("introduce {} as {}{at};", i.tag, label(&i.kind)));
        }
    }
    for p in &flow.proxies {
        out.line(&format!("proxy {} -> {}{at};", p.source, p.proxy));
    }
}
