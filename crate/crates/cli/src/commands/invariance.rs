//! `scar-invariance`: seeded policy-invariance trials on random tree MDPs.

use crate::args::ScarInvarianceArgs;
use crate::invariance::{run_trials, trials_to_csv};
use crate::{out, CliError};

pub fn run(args: &ScarInvarianceArgs) -> Result<(), CliError> {
    let trials = run_trials(args.states, args.mdps, args.seed)?;
    let dir = out::prepare(args.out.as_deref())?;
    let path = out::write_text(&dir, "invariance.csv", &trials_to_csv(&trials))?;

    let invariant = trials.iter().filter(|t| t.invariant).count();
    let flipped = trials.iter().filter(|t| t.control_flipped).count();
    println!(
        "{invariant}/{} MDPs kept their optimal action sets across all blend weights; \
         the efficiency-breaking control flipped {flipped}",
        trials.len()
    );
    println!("wrote {}", path.display());
    if invariant < trials.len() {
        return Err(CliError::Runtime(format!(
            "{} of {} MDPs changed their optimal action sets under an efficient decomposition",
            trials.len() - invariant,
            trials.len()
        )));
    }
    Ok(())
}
