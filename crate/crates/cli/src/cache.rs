use std::path::{Path, PathBuf};

use oscomb::moments::MAX_TABLE_N;
use oscomb::{build_table, MomentError, MomentTable};

use crate::{CliError, Context};

const CACHE_FILE: &str = "moments.txt";

/// `$XDG_CACHE_HOME/oscomb/moments.txt`, falling back to `~/.cache`.
pub fn default_cache_path() -> Option<PathBuf> {
    let from_env = |name: &str| {
        std::env::var_os(name)
            .map(PathBuf::from)
            .filter(|p| p.is_absolute())
    };
    let base = from_env("XDG_CACHE_HOME").or_else(|| from_env("HOME").map(|h| h.join(".cache")))?;
    Some(base.join("oscomb").join(CACHE_FILE))
}

fn load(path: &Path, ctx: &Context) -> Option<MomentTable> {
    if !path.exists() {
        return None;
    }
    match MomentTable::load(path) {
        Ok(t) => Some(t),
        Err(e) => {
            ctx.progress(&format!(
                "ignoring unreadable cache {}: {e}",
                path.display()
            ));
            None
        }
    }
}

/// A table covering every `n' <= n`, from the cache when possible. Newly
/// computed tables are written back.
pub fn table_for(n: usize, ctx: &Context) -> Result<MomentTable, CliError> {
    if n > MAX_TABLE_N {
        return Err(CliError::Numeric(format!(
            "moment table does not cover n={n}; tables are limited to n <= {MAX_TABLE_N}"
        )));
    }
    let path = ctx.cache.clone().or_else(default_cache_path);
    let cached = path.as_deref().and_then(|p| load(p, ctx));
    let mut table = match cached {
        Some(t) if t.n_max() >= n => return Ok(t),
        Some(t) => t,
        None => MomentTable::default(),
    };
    ctx.progress(&format!("computing order-statistic moments up to n={n}"));
    if table.n_max() == 0 {
        table = build_table(n).map_err(moment_error)?;
    } else {
        table.extend_to(n).map_err(moment_error)?;
    }
    if let Some(p) = path {
        if let Err(e) = table.save(&p) {
            ctx.progress(&format!("could not write cache {}: {e}", p.display()));
        }
    }
    Ok(table)
}

pub fn moment_error(e: MomentError) -> CliError {
    match e {
        MomentError::InvalidKey(_) | MomentError::InvalidParameter(_) => {
            CliError::Usage(e.to_string())
        }
        _ => CliError::Numeric(e.to_string()),
    }
}
