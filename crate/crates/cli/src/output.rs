//! Write-then-rename output so readers never see a partial file.

use std::fs;
use std::io::Write;
use std::path::Path;

use affine_sobolev::field::io::write_afld;
use serde_json::Value;

use crate::commands::Outcome;
use crate::CliError;

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Fields first, report last, so a present `report.json` implies the rest.
pub fn write_all(dir: &Path, outcome: &Outcome, meta: &Value, emit_fields: bool) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    if emit_fields && !outcome.fields.is_empty() {
        let fdir = dir.join("fields");
        fs::create_dir_all(&fdir)?;
        for (name, u) in &outcome.fields {
            let mut buf = Vec::new();
            write_afld(u, &mut buf)?;
            write_atomic(&fdir.join(format!("{name}.afld")), &buf)?;
        }
    }
    if let Some(t) = &outcome.trace {
        write_atomic(&dir.join("trace.csv"), t.as_bytes())?;
    }
    let pretty = |v: &Value| serde_json::to_vec_pretty(v).map_err(|e| CliError::Io(e.to_string()));
    write_atomic(&dir.join("meta.json"), &pretty(meta)?)?;
    write_atomic(&dir.join("report.json"), &pretty(&outcome.report)?)?;
    Ok(())
}
