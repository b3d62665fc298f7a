// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#include "cavity_td/cli.hpp"

int main(int argc, char **argv) { return cavity_td::run_cli(argc, argv); }
