#pragma once

namespace slt {

// Subcommand router for the slt binary: gen, sample, criteria, wbic, rlct,
// renorm, experiment.  Returns the process exit code: 0 ok, 1 runtime
// failure, 2 flag/config errors.
int cli_dispatch(int argc, char** argv);

}  // namespace slt
