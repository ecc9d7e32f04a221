// SPDX-License-Identifier: Apache-2.0
// Writes the synthetic fixture: model spec, weights, input batch and config.
#include <iostream>

#include <CLI11.hpp>

#include "qixai/error.hpp"
#include "qixai/fixture.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic qixai fixture", "qixai-fixture"};
  std::string dir;
  std::size_t samples = 64;
  std::uint64_t seed = 7;
  app.add_option("--out", dir, "Output directory")->required();
  app.add_option("--samples", samples, "Batch size")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--seed", seed, "Random seed")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    const auto files = qixai::fixture::write_fixture(dir, samples, seed);
    std::cout << files.model_spec.string() << "\n"
              << files.weights.string() << "\n"
              << files.batch.string() << "\n"
              << files.config.string() << "\n";
  } catch (const qixai::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qixai::exit_code_for(e.kind());
  }
  return 0;
}
