/*!
 *  Copyright (c) 2026 by Contributors
 * \file cli.h
 * \brief Entry point of the cdtax command-line tool, callable in-process.
 */
#ifndef CDTAX_TOOLS_CLI_H_
#define CDTAX_TOOLS_CLI_H_

#include <ostream>

namespace cdtax::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kBackend = 3, kBudget = 4 };

/*! \brief Runs one invocation; machine output goes to out, human summaries to err. */
int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cdtax::cli

#endif  // CDTAX_TOOLS_CLI_H_
