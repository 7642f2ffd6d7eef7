use super::{ChannelRow, ReportDocument};

const HEADER: [&str; 9] = [
    "Channel",
    "Name",
    "Transition",
    "Actor",
    "Subnet",
    "Bias",
    "Mitigations",
    "Outcomes",
    "Impacts",
];

fn cells(row: &ChannelRow) -> [String; 9] {
    let mitigations = row
        .mitigations
        .iter()
        .map(|m| {
            let tags = m
                .tags
                .iter()
                .map(|t| t.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            if m.conditional {
                format!("{} ({tags}, conditional)", m.id)
            } else {
                format!("{} ({tags})", m.id)
            }
        })
        .collect::<Vec<_>>()
        .join("; ");
    [
        row.id.to_string(),
        row.name.clone(),
        row.transition(),
        row.actor.clone().unwrap_or_default(),
        row.subnet.clone().unwrap_or_default(),
        row.bias_kinds.join(", "),
        mitigations,
        row.outcomes.join(", "),
        row.impacts.join(", "),
    ]
}

fn md_cell(s: &str) -> String {
    s.replace('\\', "\\\\")
        .replace('|', "\\|")
        .replace('\n', " ")
}

fn md_row<S: AsRef<str>>(out: &mut String, cells: &[S]) {
    out.push('|');
    for c in cells {
        out.push(' ');
        out.push_str(&md_cell(c.as_ref()));
        out.push_str(" |");
    }
    out.push('\n');
}

fn md_rule(out: &mut String, n: usize) {
    out.push('|');
    for _ in 0..n {
        out.push_str(" --- |");
    }
    out.push('\n');
}

/// Transition table, then verdicts and impacts when the document has
/// outcomes.
pub fn render_markdown(doc: &ReportDocument) -> String {
    let mut out = format!("# {}\n\n## Transitions\n\n", md_cell(&doc.model.name));
    md_row(&mut out, &HEADER);
    md_rule(&mut out, HEADER.len());
    for row in &doc.channels {
        md_row(&mut out, &cells(row));
    }
    if !doc.outcomes.is_empty() {
        out.push_str("\n## Outcomes\n\n");
        let mut header = vec![
            "Outcome".to_string(),
            "Target".to_string(),
            "Tags".to_string(),
        ];
        header.extend(doc.model.configurations.iter().cloned());
        header.push("Blocked by".into());
        md_row(&mut out, &header);
        md_rule(&mut out, header.len());
        for o in &doc.outcomes {
            let mut row = vec![
                o.id.clone(),
                o.target.to_string(),
                o.tags
                    .iter()
                    .map(|t| t.as_str())
                    .collect::<Vec<_>>()
                    .join(", "),
            ];
            let mut blockers = std::collections::BTreeSet::new();
            for c in &doc.assessments.configurations {
                match c.assessments.iter().find(|a| a.outcome == o.id) {
                    Some(a) => {
                        row.push(a.verdict.to_string());
                        blockers.extend(a.blocking_mitigations.iter().map(ToString::to_string));
                    }
                    None => row.push("invalid".into()),
                }
            }
            row.push(blockers.into_iter().collect::<Vec<_>>().join(", "));
            md_row(&mut out, &row);
        }
    }
    if !doc.impacts.is_empty() {
        out.push_str("\n## Impacts\n\n");
        let mut header = vec![
            "Impact".to_string(),
            "Outcomes".to_string(),
            "Paths".to_string(),
        ];
        header.extend(doc.model.configurations.iter().cloned());
        md_row(&mut out, &header);
        md_rule(&mut out, header.len());
        for i in &doc.impacts {
            let mut row = vec![
                i.id.clone(),
                i.outcomes.join(", "),
                i.paths
                    .iter()
                    .map(|p| p.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(" "))
                    .collect::<Vec<_>>()
                    .join("; "),
            ];
            for c in &doc.model.configurations {
                row.push(match i.open.get(c) {
                    Some(true) => "OPEN".into(),
                    Some(false) => "not open".into(),
                    None => "invalid".into(),
                });
            }
            md_row(&mut out, &row);
        }
    }
    out
}

/// The transition table as RFC 4180 CSV.
pub fn render_csv(doc: &ReportDocument) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for row in &doc.channels {
        w.write_record(cells(row)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
}
