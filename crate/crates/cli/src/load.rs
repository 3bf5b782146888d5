use std::fs;
use std::path::Path;

use clap::ValueEnum;
use gmsc_core::harness::Acceptor;
use gmsc_core::{Error, Fcmpa, GmscProgram, GnnF, LabeledGraph};

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Program,
    Automaton,
    Gnn,
}

pub enum Loaded {
    Program(GmscProgram),
    Automaton(Fcmpa),
    Gnn(GnnF),
}

impl Loaded {
    pub fn acceptor(&self) -> &dyn Acceptor {
        match self {
            Loaded::Program(p) => p,
            Loaded::Automaton(a) => a,
            Loaded::Gnn(n) => n,
        }
    }
}

pub fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

pub fn kind_of(path: &Path, explicit: Option<Kind>) -> Result<Kind, Failure> {
    if let Some(k) = explicit {
        return Ok(k);
    }
    let name = path.to_string_lossy();
    if name.ends_with(".gmsc") {
        Ok(Kind::Program)
    } else if name.ends_with(".fcmpa.json") {
        Ok(Kind::Automaton)
    } else if name.ends_with(".gnn.json") {
        Ok(Kind::Gnn)
    } else {
        Err(Failure::Usage(format!(
            "cannot tell the machine kind of {name}; use .gmsc, .fcmpa.json, .gnn.json or --kind"
        )))
    }
}

pub fn machine(path: &Path, explicit: Option<Kind>) -> Result<Loaded, Failure> {
    let kind = kind_of(path, explicit)?;
    let text = read(path)?;
    let at = |e: Error| Failure::from(e).context(path);
    Ok(match kind {
        Kind::Program => Loaded::Program(GmscProgram::parse(&text).map_err(at)?),
        Kind::Automaton => Loaded::Automaton(Fcmpa::parse(&text).map_err(at)?),
        Kind::Gnn => Loaded::Gnn(GnnF::parse(&text).map_err(at)?),
    })
}

pub fn graph(path: &Path) -> Result<LabeledGraph, Failure> {
    LabeledGraph::parse(&read(path)?).map_err(|e| Failure::from(e).context(path))
}

pub fn program(path: &Path) -> Result<GmscProgram, Failure> {
    match machine(path, Some(Kind::Program))? {
        Loaded::Program(p) => Ok(p),
        _ => unreachable!(),
    }
}

pub fn automaton(path: &Path) -> Result<Fcmpa, Failure> {
    match machine(path, Some(Kind::Automaton))? {
        Loaded::Automaton(a) => Ok(a),
        _ => unreachable!(),
    }
}
