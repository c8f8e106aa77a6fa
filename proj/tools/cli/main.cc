/*!
 *  Copyright (c) 2026 by Contributors
 * \file main.cc
 */
#include <iostream>

#include "cli.h"

int main(int argc, char** argv) { return cdtax::cli::Run(argc, argv, std::cout, std::cerr); }
