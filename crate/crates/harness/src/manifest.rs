use crate::settings::Settings;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Reproducibility record of one run: command, resolved settings and seed.
pub fn render(command: &str, settings: &Settings, extra: &[(String, String)]) -> String {
    let mut out = String::from("# ofdm-lab run manifest\n");
    let _ = writeln!(out, "command = {command}");
    let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "config_hash = {}", settings.hash());
    let rendered = settings.render();
    for (k, v) in extra {
        let echoed = rendered
            .lines()
            .any(|l| l.split(" = ").next() == Some(k.as_str()));
        if k != "config_hash" && !echoed {
            let _ = writeln!(out, "{k} = {v}");
        }
    }
    out.push_str(&rendered);
    out
}

/// `<output>.manifest` next to an output file.
pub fn path_for(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}
