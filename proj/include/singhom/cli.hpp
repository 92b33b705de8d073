#pragma once

namespace singhom {

// Exit codes: 0 success, 1 failed verification or experiment check,
// 2 usage, configuration, parse or precondition error. Errors are also
// reported as a JSON object on stderr.
int cli_main(int argc, char** argv);

}  // namespace singhom
