//! CSV certificate rows: one row per assertion with columns
//! (name, lhs, rhs, relation, pass), preceded by comment lines embedding the
//! library version, the full config and the seed so identical invocations
//! reproduce byte-identical output.

use std::io::Write;

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub lhs: String,
    pub rhs: String,
    pub relation: &'static str,
    pub pass: bool,
}

impl Row {
    pub fn new(
        name: impl Into<String>,
        lhs: impl Into<String>,
        rhs: impl Into<String>,
        relation: &'static str,
        pass: bool,
    ) -> Self {
        Row {
            name: name.into(),
            lhs: lhs.into(),
            rhs: rhs.into(),
            relation,
            pass,
        }
    }

    pub fn info(name: impl Into<String>, lhs: impl Into<String>) -> Self {
        Row::new(name, lhs, "", "info", true)
    }
}

fn escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn write_csv(
    out: &mut dyn Write,
    config: &str,
    seed: Option<u64>,
    rows: &[Row],
) -> std::io::Result<()> {
    writeln!(out, "# mechlab {}", mechlab_core::VERSION)?;
    writeln!(out, "# config: {config}")?;
    match seed {
        Some(s) => writeln!(out, "# seed: {s}")?,
        None => writeln!(out, "# seed: -")?,
    }
    writeln!(out, "name,lhs,rhs,relation,pass")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            escape(&r.name),
            escape(&r.lhs),
            escape(&r.rhs),
            escape(r.relation),
            r.pass
        )?;
    }
    Ok(())
}
