#pragma once

namespace convreg {

// Entry point behind the convreg binary. Returns 0 on success, 2 on
// command-line usage errors, 1 on any runtime failure (including a failed
// gradient check).
int cli_main(int argc, char** argv);

}  // namespace convreg
