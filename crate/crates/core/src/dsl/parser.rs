use std::collections::{BTreeMap, BTreeSet};

use super::diagnostic::{Diagnostic, ParseError, Span};
use super::lexer::{lex, Tok, Token};
use super::FORMAT_VERSION;
use crate::analysis::{ImpactSpec, OutcomeSpec};
use crate::model::{
    is_valid_identifier, AlternativeSet, Carry, Channel, ChannelId, Conclusion, Condition,
    FeatureTag, FlowSpec, InferenceRule, Introduce, Mitigation, Network, Proxy, Site, SiteId,
    Subnet, SummaryEntry, TagSelection, Toggle, TypeId, Variant,
};

/// Loads the text of a `defined-by "file"` reference.
pub type Resolver<'a> = &'a dyn Fn(&str) -> Result<(String, String), String>;

/// A parsed file before it is turned into a model.
pub(crate) struct Document {
    pub network: Network,
    pub outcomes: Vec<OutcomeSpec>,
    pub impacts: Vec<ImpactSpec>,
    pub spans: BTreeMap<String, Span>,
}

enum FlowStmt {
    Carry(SiteId, TagSelection),
    CarryNone,
    Drop(Option<String>, Mitigation),
    Introduce(Introduce),
    Proxy(Proxy),
    Summary(SummaryEntry),
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    file: String,
    resolver: Resolver<'a>,
    depth: usize,
    errors: Vec<Diagnostic>,
}

type PResult<T> = Result<T, Diagnostic>;
type Stmt = (FlowStmt, Option<(SiteId, Span)>, Span);

const MAX_DEPTH: usize = 32;

pub(crate) fn parse_document(
    text: &str,
    file: &str,
    resolver: Resolver<'_>,
    depth: usize,
) -> Result<Document, ParseError> {
    let toks = lex(text, file)?;
    let mut p = Parser {
        toks,
        pos: 0,
        file: file.to_string(),
        resolver,
        depth,
        errors: Vec::new(),
    };
    let doc = p.document().map_err(ParseError::from)?;
    if p.errors.is_empty() {
        Ok(doc)
    } else {
        Err(ParseError {
            diagnostics: p.errors,
        })
    }
}

/// Per-document state while items are read.
#[derive(Default)]
struct Draft {
    network: Network,
    outcomes: Vec<(OutcomeSpec, Span)>,
    impacts: Vec<(ImpactSpec, Span)>,
    spans: BTreeMap<String, Span>,
    /// Tags that must be declared, with the place they were used.
    tag_uses: Vec<(FeatureTag, Span)>,
    explicit_sites: BTreeSet<SiteId>,
    named: bool,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, span: Span, code: &str, msg: impl Into<String>) -> Diagnostic {
        Diagnostic::error(&self.file, span, code, msg)
    }

    fn unexpected(&self, what: &str) -> Diagnostic {
        self.err(
            self.span(),
            "P001",
            format!("expected {what}, found {}", self.peek().describe()),
        )
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Ident(s) => {
                if !is_valid_identifier(&s) {
                    return Err(self.err(span, "P001", format!("`{s}` is not a valid identifier")));
                }
                self.bump();
                Ok((s, span))
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    /// Any word, including dashed keywords.
    fn keyword(&mut self) -> PResult<(String, Span)> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok((s, span))
            }
            _ => Err(self.unexpected("a keyword")),
        }
    }

    fn string(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("a string")),
        }
    }

    /// An identifier or a quoted string.
    fn label(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            Tok::Ident(_) => Ok(self.ident()?.0),
            _ => Err(self.unexpected("a name")),
        }
    }

    fn ident_list(&mut self) -> PResult<Vec<(String, Span)>> {
        let mut out = vec![self.ident()?];
        while self.eat_punct(",") {
            out.push(self.ident()?);
        }
        Ok(out)
    }

    fn label_list(&mut self) -> PResult<Vec<String>> {
        let mut out = vec![self.label()?];
        while self.eat_punct(",") {
            out.push(self.label()?);
        }
        Ok(out)
    }

    fn document(&mut self) -> PResult<Document> {
        if self.is_kw("ifm") && matches!(self.peek_at(1), Tok::Int(_)) {
            self.bump();
            let span = self.span();
            let Tok::Int(v) = self.bump().tok else {
                unreachable!()
            };
            if v != FORMAT_VERSION {
                return Err(self.err(span, "P006", format!("unsupported format version {v}")));
            }
            self.expect_punct(";")?;
        }
        let draft = self.items(false)?;
        self.finish(draft)
    }

    fn items(&mut self, nested: bool) -> PResult<Draft> {
        let mut d = Draft::default();
        loop {
            if nested && self.is_punct("}") {
                return Ok(d);
            }
            if matches!(self.peek(), Tok::Eof) {
                if nested {
                    return Err(self.unexpected("`}`"));
                }
                return Ok(d);
            }
            let kw_span = self.span();
            let Tok::Ident(kw) = self.peek().clone() else {
                return Err(self.unexpected("a declaration"));
            };
            match kw.as_str() {
                "network" => {
                    self.bump();
                    if d.named {
                        return Err(self.err(kw_span, "P002", "network name given twice"));
                    }
                    d.network.name = self.string()?;
                    d.named = true;
                    self.expect_punct(";")?;
                }
                "tags" => {
                    self.bump();
                    self.expect_punct("{")?;
                    while !self.eat_punct("}") {
                        let (t, _) = self.ident()?;
                        d.network.tags.insert(t.into());
                        if !self.eat_punct(",") {
                            self.expect_punct("}")?;
                            break;
                        }
                    }
                }
                "types" => {
                    self.bump();
                    self.types_block(&mut d)?;
                }
                "rule" => {
                    self.bump();
                    self.rule(&mut d)?;
                }
                "site" => {
                    self.bump();
                    self.site(&mut d)?;
                }
                "channel" => {
                    self.bump();
                    self.channel(&mut d)?;
                }
                "subnet" => {
                    self.bump();
                    self.subnet(&mut d)?;
                }
                "alt" if !nested => {
                    self.bump();
                    self.alternative(&mut d)?;
                }
                "outcome" if !nested => {
                    self.bump();
                    self.outcome(&mut d)?;
                }
                "impact" if !nested => {
                    self.bump();
                    self.impact(&mut d)?;
                }
                _ => return Err(self.unexpected("a declaration")),
            }
        }
    }

    fn types_block(&mut self, d: &mut Draft) -> PResult<()> {
        self.expect_punct("{")?;
        while !self.eat_punct("}") {
            let (t, _) = self.ident()?;
            let ts = &mut d.network.type_system;
            ts.types.insert(TypeId::from(t.as_str()));
            if self.eat_punct("<") {
                for (sup, _) in self.ident_list()? {
                    ts.subtypes.insert((TypeId::from(t.as_str()), sup.into()));
                }
            }
            self.expect_punct(";")?;
        }
        Ok(())
    }

    fn rule(&mut self, d: &mut Draft) -> PResult<()> {
        let (name, span) = self.ident()?;
        self.expect_punct("{")?;
        self.expect_kw("when")?;
        let mut conditions = Vec::new();
        loop {
            let (kind, kspan) = self.ident()?;
            let (ty, _) = self.ident()?;
            let ty = TypeId::from(ty);
            conditions.push(match kind.as_str() {
                "channel" => Condition::ChannelHasType(ty),
                "input" => Condition::InputHasType(ty),
                "output" => Condition::OutputHasType(ty),
                _ => {
                    return Err(self.err(kspan, "P001", "expected `channel`, `input` or `output`"))
                }
            });
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        self.expect_kw("then")?;
        let (kind, kspan) = self.ident()?;
        let conclusion = match kind.as_str() {
            "channel" => Conclusion::Channel(self.ident()?.0.into()),
            "output" => {
                let position = match self.peek().clone() {
                    Tok::Int(n) => {
                        self.bump();
                        Some(n as usize)
                    }
                    _ => None,
                };
                Conclusion::Output {
                    position,
                    ty: self.ident()?.0.into(),
                }
            }
            _ => return Err(self.err(kspan, "P001", "expected `channel` or `output`")),
        };
        self.expect_punct(";")?;
        self.expect_punct("}")?;
        if d.network.type_system.rules.contains_key(&name) {
            return Err(self.err(span, "P002", format!("rule `{name}` defined twice")));
        }
        d.network.type_system.rules.insert(
            name.clone(),
            InferenceRule {
                name,
                conditions,
                conclusion,
            },
        );
        Ok(())
    }

    fn site(&mut self, d: &mut Draft) -> PResult<()> {
        let (id, span) = self.ident()?;
        let id = SiteId::from(id);
        if !d.explicit_sites.insert(id.clone()) {
            return Err(self.err(span, "P002", format!("site `{id}` defined twice")));
        }
        d.spans.insert(format!("site:{id}"), span);
        let mut site = Site::new(id.clone());
        if !self.eat_punct(";") {
            self.expect_punct("{")?;
            while !self.eat_punct("}") {
                let (kw, kspan) = self.keyword()?;
                match kw.as_str() {
                    "name" => site.name = self.string()?,
                    "type" => site
                        .types
                        .extend(self.ident_list()?.into_iter().map(|t| TypeId::from(t.0))),
                    "actor" => site.actor = Some(self.ident()?.0.into()),
                    "subnet" => site.subnet = Some(self.label()?),
                    "seed" => {
                        for (t, s) in self.ident_list()? {
                            d.tag_uses.push((t.as_str().into(), s));
                            site.seeds.insert(t.into());
                        }
                    }
                    _ => {
                        return Err(self.err(
                            kspan,
                            "P001",
                            format!("unknown site property `{kw}`"),
                        ))
                    }
                }
                self.expect_punct(";")?;
            }
        }
        d.network.sites.insert(id, site);
        Ok(())
    }

    fn at_output(&mut self) -> PResult<Option<(SiteId, Span)>> {
        if self.eat_punct("@") {
            let (o, s) = self.ident()?;
            Ok(Some((o.into(), s)))
        } else {
            Ok(None)
        }
    }

    fn channel(&mut self, d: &mut Draft) -> PResult<()> {
        let (id, span) = self.ident()?;
        let id = ChannelId::from(id);
        if d.network.channels.contains_key(&id) {
            return Err(self.err(span, "P002", format!("channel `{id}` defined twice")));
        }
        d.spans.insert(format!("channel:{id}"), span);
        let mut ch = Channel::new(id.clone(), Vec::<SiteId>::new(), Vec::<SiteId>::new());
        let mut endpoints = false;
        let mut stmts: Vec<Stmt> = Vec::new();
        self.expect_punct("{")?;
        while !self.eat_punct("}") {
            let (kw, kspan) = self.keyword()?;
            match kw.as_str() {
                "name" => ch.name = self.string()?,
                "operation" => ch.operation = self.string()?,
                "from" => {
                    if endpoints {
                        return Err(self.err(kspan, "P002", "channel endpoints given twice"));
                    }
                    endpoints = true;
                    ch.inputs = self
                        .ident_list()?
                        .into_iter()
                        .map(|s| SiteId::from(s.0))
                        .collect();
                    self.expect_punct("->")?;
                    ch.outputs = self
                        .ident_list()?
                        .into_iter()
                        .map(|s| SiteId::from(s.0))
                        .collect();
                }
                "type" => ch
                    .types
                    .extend(self.ident_list()?.into_iter().map(|t| TypeId::from(t.0))),
                "actor" => ch.actor = Some(self.ident()?.0.into()),
                "subnet" => ch.subnet = Some(self.label()?),
                "bias" => ch.bias_kinds.extend(self.label_list()?),
                "carry" => {
                    let stmt = if self.is_kw("none")
                        && !matches!(self.peek_at(1), Tok::Punct("[") | Tok::Punct("*"))
                    {
                        self.bump();
                        FlowStmt::CarryNone
                    } else {
                        let (input, _) = self.ident()?;
                        let sel = if self.eat_punct("*") {
                            TagSelection::All
                        } else {
                            self.expect_punct("[")?;
                            let mut tags = BTreeSet::new();
                            if !self.is_punct("]") {
                                for (t, s) in self.ident_list()? {
                                    d.tag_uses.push((t.as_str().into(), s));
                                    tags.insert(FeatureTag::from(t));
                                }
                            }
                            self.expect_punct("]")?;
                            TagSelection::Tags(tags)
                        };
                        FlowStmt::Carry(input.into(), sel)
                    };
                    stmts.push((stmt, self.at_output()?, kspan));
                }
                "drop" => {
                    let mut tags = BTreeSet::new();
                    for (t, s) in self.ident_list()? {
                        d.tag_uses.push((t.as_str().into(), s));
                        tags.insert(FeatureTag::from(t));
                    }
                    let conditional = if self.eat_kw("conditional") {
                        true
                    } else {
                        self.eat_kw("unconditional");
                        false
                    };
                    let id = match self.peek() {
                        Tok::Str(_) => Some(self.string()?),
                        _ => None,
                    };
                    let note = if self.eat_kw("note") {
                        self.string()?
                    } else {
                        String::new()
                    };
                    let m = Mitigation {
                        id: id.clone().unwrap_or_default(),
                        tags,
                        conditional,
                        note,
                    };
                    stmts.push((FlowStmt::Drop(id, m), self.at_output()?, kspan));
                }
                "introduce" | "introduces" => {
                    let (t, _) = self.ident()?;
                    let kind = if self.eat_kw("as") {
                        self.label()?
                    } else {
                        String::new()
                    };
                    d.network.tags.insert(t.as_str().into());
                    let stmt = FlowStmt::Introduce(Introduce {
                        tag: t.into(),
                        kind,
                    });
                    stmts.push((stmt, self.at_output()?, kspan));
                }
                "proxy" => {
                    let (source, s) = self.ident()?;
                    self.expect_punct("->")?;
                    let (proxy, _) = self.ident()?;
                    d.tag_uses.push((source.as_str().into(), s));
                    d.network.tags.insert(proxy.as_str().into());
                    let stmt = FlowStmt::Proxy(Proxy {
                        source: source.into(),
                        proxy: proxy.into(),
                    });
                    stmts.push((stmt, self.at_output()?, kspan));
                }
                "summary" => {
                    let (input, from) = if self.eat_kw("introduced") {
                        (None, None)
                    } else {
                        self.expect_kw("from")?;
                        let (i, _) = self.ident()?;
                        let (t, _) = self.ident()?;
                        (Some(SiteId::from(i)), Some(FeatureTag::from(t)))
                    };
                    let via = if self.eat_kw("via") {
                        self.ident_list()?
                            .into_iter()
                            .map(|t| FeatureTag::from(t.0))
                            .collect()
                    } else {
                        Vec::new()
                    };
                    self.expect_punct("->")?;
                    let (to, _) = self.ident()?;
                    let conditional = self.eat_kw("conditional");
                    let entry = SummaryEntry {
                        input,
                        from,
                        via,
                        to: to.into(),
                        conditional,
                    };
                    let tags = &mut d.network.tags;
                    tags.extend(entry.from.iter().chain(&entry.via).cloned());
                    tags.insert(entry.to.clone());
                    stmts.push((FlowStmt::Summary(entry), self.at_output()?, kspan));
                }
                "defined-by" => {
                    if ch.definition.is_some() {
                        return Err(self.err(kspan, "P002", "definition given twice"));
                    }
                    ch.definition = Some(Box::new(self.definition(kspan)?));
                    continue;
                }
                _ => {
                    return Err(self.err(kspan, "P001", format!("unknown channel property `{kw}`")))
                }
            }
            self.expect_punct(";")?;
        }
        if !endpoints {
            return Err(self.err(
                span,
                "P001",
                format!("channel `{id}` has no `from ... -> ...;`"),
            ));
        }
        ch.flow = FlowSpec::carry_all(&ch.outputs);
        for (stmt, at, sspan) in stmts {
            let targets: Vec<SiteId> = match at {
                Some((o, ospan)) => {
                    if !ch.outputs.contains(&o) {
                        self.errors.push(self.err(
                            ospan,
                            "P004",
                            format!("`{o}` is not an output of channel `{id}`"),
                        ));
                        continue;
                    }
                    vec![o]
                }
                None => ch.outputs.clone(),
            };
            for o in targets {
                let flow = ch
                    .flow
                    .outputs
                    .get_mut(&o)
                    .expect("carry_all covers outputs");
                match &stmt {
                    FlowStmt::Carry(input, sel) => {
                        if !ch.inputs.contains(input) {
                            self.errors.push(self.err(
                                sspan,
                                "P004",
                                format!("`{input}` is not an input of channel `{id}`"),
                            ));
                            break;
                        }
                        match &mut flow.carries {
                            c @ Carry::All => *c = Carry::Explicit(BTreeMap::new()),
                            Carry::Explicit(_) => {}
                            Carry::Summary(_) => {
                                self.errors.push(self.err(
                                    sspan,
                                    "P007",
                                    "`carry` cannot be mixed with `summary`",
                                ));
                                break;
                            }
                        }
                        if let Carry::Explicit(map) = &mut flow.carries {
                            if map.insert(input.clone(), sel.clone()).is_some() {
                                self.errors.push(self.err(
                                    sspan,
                                    "P002",
                                    format!("carry for `{input}` given twice"),
                                ));
                            }
                        }
                    }
                    FlowStmt::CarryNone => match &mut flow.carries {
                        c @ Carry::All => *c = Carry::Explicit(BTreeMap::new()),
                        Carry::Explicit(_) => {}
                        Carry::Summary(_) => {
                            self.errors.push(self.err(
                                sspan,
                                "P007",
                                "`carry` cannot be mixed with `summary`",
                            ));
                        }
                    },
                    FlowStmt::Summary(entry) => {
                        match &mut flow.carries {
                            c @ Carry::All => *c = Carry::Summary(BTreeSet::new()),
                            Carry::Summary(_) => {}
                            Carry::Explicit(_) => {
                                self.errors.push(self.err(
                                    sspan,
                                    "P007",
                                    "`summary` cannot be mixed with `carry`",
                                ));
                                break;
                            }
                        }
                        if let Some(input) = &entry.input {
                            if !ch.inputs.contains(input) {
                                self.errors.push(self.err(
                                    sspan,
                                    "P004",
                                    format!("`{input}` is not an input of channel `{id}`"),
                                ));
                                break;
                            }
                        }
                        if let Carry::Summary(set) = &mut flow.carries {
                            set.insert(entry.clone());
                        }
                    }
                    FlowStmt::Drop(explicit, m) => {
                        let mut m = m.clone();
                        match explicit {
                            Some(mid) => {
                                if flow.drops.contains_key(mid) {
                                    self.errors.push(self.err(
                                        sspan,
                                        "P002",
                                        format!("mitigation `{mid}` defined twice"),
                                    ));
                                    continue;
                                }
                            }
                            None => {
                                let mut n = flow.drops.len() + 1;
                                while flow.drops.contains_key(&format!("drop{n}")) {
                                    n += 1;
                                }
                                m.id = format!("drop{n}");
                            }
                        }
                        flow.drops.insert(m.id.clone(), m);
                    }
                    FlowStmt::Introduce(i) => {
                        flow.introduces.insert(i.clone());
                    }
                    FlowStmt::Proxy(p) => {
                        flow.proxies.insert(p.clone());
                    }
                }
            }
        }
        for s in ch.inputs.iter().chain(&ch.outputs) {
            if !d.network.sites.contains_key(s) {
                d.network.sites.insert(s.clone(), Site::new(s.clone()));
            }
        }
        d.network.channels.insert(id, ch);
        Ok(())
    }

    fn definition(&mut self, span: Span) -> PResult<Network> {
        if self.depth >= MAX_DEPTH {
            return Err(self.err(span, "P005", "definitions nested too deeply"));
        }
        if let Tok::Str(_) = self.peek() {
            let path = self.string()?;
            self.expect_punct(";")?;
            let (name, text) = (self.resolver)(&path)
                .map_err(|e| self.err(span, "P005", format!("cannot load `{path}`: {e}")))?;
            let doc = parse_document(&text, &name, self.resolver, self.depth + 1).map_err(|e| {
                let mut diags = e.diagnostics;
                let first = diags.remove(0);
                self.errors.extend(diags);
                first
            })?;
            if !doc.outcomes.is_empty()
                || !doc.impacts.is_empty()
                || !doc.network.alternatives.is_empty()
            {
                return Err(self.err(
                    span,
                    "P005",
                    format!("`{path}` must contain only a network"),
                ));
            }
            return Ok(doc.network);
        }
        self.expect_punct("{")?;
        self.depth += 1;
        let draft = self.items(true);
        self.depth -= 1;
        let draft = draft?;
        self.expect_punct("}")?;
        Ok(self.finish(draft)?.network)
    }

    fn subnet(&mut self, d: &mut Draft) -> PResult<()> {
        let span = self.span();
        let name = self.label()?;
        if d.network.subnets.contains_key(&name) {
            return Err(self.err(span, "P002", format!("subnet `{name}` defined twice")));
        }
        d.spans.insert(format!("subnet:{name}"), span);
        let mut sub = Subnet {
            name: name.clone(),
            ..Subnet::default()
        };
        if !self.eat_punct(";") {
            self.expect_punct("{")?;
            while !self.eat_punct("}") {
                let (kw, kspan) = self.keyword()?;
                match kw.as_str() {
                    "parent" => sub.parent = Some(self.label()?),
                    "abstract" => sub.abstract_id = Some(self.ident()?.0.into()),
                    "color" => sub.color = Some(self.string()?),
                    _ => {
                        return Err(self.err(
                            kspan,
                            "P001",
                            format!("unknown subnet property `{kw}`"),
                        ))
                    }
                }
                self.expect_punct(";")?;
            }
        }
        d.network.subnets.insert(name, sub);
        Ok(())
    }

    fn toggle(&mut self) -> PResult<Toggle> {
        let (kind, kspan) = self.ident()?;
        let t = match kind.as_str() {
            "edge" => {
                let (input, _) = self.ident()?;
                self.expect_punct("->")?;
                let (channel, _) = self.ident()?;
                Toggle::Edge {
                    channel: channel.into(),
                    input: input.into(),
                }
            }
            "channel" => Toggle::Channel {
                channel: self.ident()?.0.into(),
            },
            "mitigation" => {
                let (channel, _) = self.ident()?;
                Toggle::Mitigation {
                    channel: channel.into(),
                    mitigation: self.label()?,
                }
            }
            _ => return Err(self.err(kspan, "P001", "expected `edge`, `channel` or `mitigation`")),
        };
        self.expect_punct(";")?;
        Ok(t)
    }

    fn alternative(&mut self, d: &mut Draft) -> PResult<()> {
        let (id, span) = self.ident()?;
        if d.network.alternatives.contains_key(id.as_str()) {
            return Err(self.err(span, "P002", format!("alternative `{id}` defined twice")));
        }
        d.spans.insert(format!("alt:{id}"), span);
        let mut alt = AlternativeSet {
            id: id.as_str().into(),
            variants: Vec::new(),
            includes_absent: false,
        };
        self.expect_punct("{")?;
        while !self.eat_punct("}") {
            let (kw, kspan) = self.keyword()?;
            match kw.as_str() {
                "absent" => {
                    if alt.includes_absent {
                        return Err(self.err(kspan, "P002", "`absent` given twice"));
                    }
                    alt.includes_absent = true;
                    self.expect_punct(";")?;
                }
                "variant" => {
                    let (name, nspan) = self.ident()?;
                    if name == crate::model::ABSENT || alt.variants.iter().any(|v| v.name == name) {
                        return Err(self.err(
                            nspan,
                            "P002",
                            format!("member `{name}` defined twice"),
                        ));
                    }
                    let mut present = BTreeSet::new();
                    self.expect_punct("{")?;
                    while !self.eat_punct("}") {
                        present.insert(self.toggle()?);
                    }
                    alt.variants.push(Variant { name, present });
                }
                _ => return Err(self.err(kspan, "P001", "expected `variant` or `absent`")),
            }
        }
        d.network.alternatives.insert(id.into(), alt);
        Ok(())
    }

    fn outcome(&mut self, d: &mut Draft) -> PResult<()> {
        let (id, span) = self.ident()?;
        if d.outcomes.iter().any(|(o, _)| o.id == id) {
            return Err(self.err(span, "P002", format!("outcome `{id}` defined twice")));
        }
        d.spans.insert(format!("outcome:{id}"), span);
        let mut o = OutcomeSpec::new(id, "", &[]);
        let mut target = false;
        self.expect_punct("{")?;
        while !self.eat_punct("}") {
            let (kw, kspan) = self.keyword()?;
            match kw.as_str() {
                "description" => o.description = self.string()?,
                "note" => o.note = self.string()?,
                "target" => {
                    o.target = self.ident()?.0.into();
                    target = true;
                }
                "tags" => o.tags.extend(
                    self.ident_list()?
                        .into_iter()
                        .map(|t| FeatureTag::from(t.0)),
                ),
                "from" => o.from.extend(self.ident_list()?.into_iter().map(|t| t.0)),
                "via" => o.via = Some(self.label()?),
                _ => {
                    return Err(self.err(kspan, "P001", format!("unknown outcome property `{kw}`")))
                }
            }
            self.expect_punct(";")?;
        }
        if !target || o.tags.is_empty() {
            return Err(self.err(
                span,
                "P001",
                format!("outcome `{}` needs `target` and `tags`", o.id),
            ));
        }
        d.outcomes.push((o, span));
        Ok(())
    }

    fn impact(&mut self, d: &mut Draft) -> PResult<()> {
        let (id, span) = self.ident()?;
        if d.impacts.iter().any(|(i, _)| i.id == id) {
            return Err(self.err(span, "P002", format!("impact `{id}` defined twice")));
        }
        d.spans.insert(format!("impact:{id}"), span);
        let mut imp = ImpactSpec {
            id,
            description: String::new(),
            outcomes: Vec::new(),
            paths: Vec::new(),
            note: String::new(),
        };
        self.expect_punct("{")?;
        while !self.eat_punct("}") {
            let (kw, kspan) = self.keyword()?;
            match kw.as_str() {
                "description" => imp.description = self.string()?,
                "note" => imp.note = self.string()?,
                "outcomes" => imp
                    .outcomes
                    .extend(self.ident_list()?.into_iter().map(|t| t.0)),
                "path" => imp.paths.push(
                    self.ident_list()?
                        .into_iter()
                        .map(|t| ChannelId::from(t.0))
                        .collect(),
                ),
                _ => {
                    return Err(self.err(kspan, "P001", format!("unknown impact property `{kw}`")))
                }
            }
            self.expect_punct(";")?;
        }
        d.impacts.push((imp, span));
        Ok(())
    }

    fn finish(&mut self, d: Draft) -> PResult<Document> {
        let declared = &d.network.tags;
        for (t, span) in &d.tag_uses {
            if !declared.contains(t) {
                self.errors
                    .push(self.err(*span, "P003", format!("undeclared feature tag `{t}`")));
            }
        }
        let mut outcomes: Vec<OutcomeSpec> = d.outcomes.into_iter().map(|(o, _)| o).collect();
        outcomes.sort_by(|a, b| a.id.cmp(&b.id));
        let mut impacts: Vec<ImpactSpec> = d.impacts.into_iter().map(|(i, _)| i).collect();
        impacts.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Document {
            network: d.network,
            outcomes,
            impacts,
            spans: d.spans,
        })
    }
}
