//! Degradation parameter flags, generated from the parameter table.
//!
//! `--<param>` sets a parameter for every degradation that reads it;
//! `--<degradation>-<param>` sets it for one degradation and wins over the
//! generic form.

use std::collections::BTreeMap;

use anyhow::{Context, Result};
use clap::{Arg, ArgAction, ArgMatches};
use mdtk_core::degradations::{DegradationParams, ParamKey};
use mdtk_core::DegradationId;

fn specific_id(id: DegradationId, key: ParamKey) -> String {
    format!("{}-{}", id.name().replace('_', "-"), key.name())
}

fn flag_arg(name: String, key: ParamKey, help: String) -> Arg {
    let arg = Arg::new(name.clone()).long(name).help(help).action(ArgAction::Set);
    if key.is_flag() {
        arg.num_args(0..=1)
            .require_equals(true)
            .default_missing_value("true")
            .value_name("BOOL")
    } else {
        arg.value_name(if key == ParamKey::IntervalWeights {
            "INTERVAL:WEIGHT,..."
        } else {
            "N"
        })
    }
}

/// Adds the parameter flags to the named subcommands.
pub fn register(mut command: clap::Command, subcommands: &[&str]) -> clap::Command {
    for &name in subcommands {
        command = command.mut_subcommand(name, |mut sub| {
            sub = sub.next_help_heading("Degradation parameters");
            for key in ParamKey::ALL {
                let help = format!("Set {} for every degradation that reads it", key.name());
                sub = sub.arg(flag_arg(key.name().to_string(), key, help));
            }
            for id in DegradationId::ALL {
                for &key in id.params() {
                    let arg = flag_arg(specific_id(id, key), key, format!("Set {} for {id}", key.name()));
                    sub = sub.arg(arg.hide_short_help(true));
                }
            }
            sub
        });
    }
    command
}

/// Parameter values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    generic: Vec<(ParamKey, String)>,
    specific: Vec<(DegradationId, ParamKey, String)>,
}

pub fn overrides(matches: &ArgMatches) -> Result<Overrides> {
    let mut out = Overrides::default();
    for key in ParamKey::ALL {
        if let Some(v) = matches.get_one::<String>(key.name()) {
            out.generic.push((key, v.clone()));
        }
    }
    for id in DegradationId::ALL {
        for &key in id.params() {
            if let Some(v) = matches.get_one::<String>(&specific_id(id, key)) {
                out.specific.push((id, key, v.clone()));
            }
        }
    }
    Ok(out)
}

impl Overrides {
    /// Applies the overrides on top of `params`, keeping entries that are
    /// left untouched as they are.
    pub fn apply(&self, params: &mut BTreeMap<DegradationId, DegradationParams>) -> Result<()> {
        for id in DegradationId::ALL {
            let mut p = params.get(&id).cloned().unwrap_or_default();
            let mut changed = false;
            for (key, value) in &self.generic {
                if id.params().contains(key) {
                    p.set(*key, value)?;
                    changed = true;
                }
            }
            for (_, key, value) in self.specific.iter().filter(|(d, _, _)| *d == id) {
                p.set(*key, value)?;
                changed = true;
            }
            if changed {
                p.validate().with_context(|| format!("parameters for {id}"))?;
                params.insert(id, p);
            }
        }
        Ok(())
    }
}
