// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(nnvfuzz::cli::main());
}
