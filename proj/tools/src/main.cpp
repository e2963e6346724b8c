// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
//
// enchvac: command line front end. Exit codes: 0 success, 1 validation
// error (bad arguments or config), 2 runtime failure.
#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>

#include "enchvac/he/he.hpp"

namespace {

int run_keygen(const std::string& preset, const std::string& backend, uint64_t seed,
               const std::string& out) {
  namespace he = enchvac::he;
  auto params = he::HeParams::preset(preset);
  params.validate();
  auto ctx = he::make_context(params, he::backend_from_string(backend));
  auto keys = he::keygen(ctx, seed);
  auto bytes = he::serialize_keys(keys);

  std::filesystem::path path(out);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + out + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  f.close();
  std::printf("wrote %zu key bytes to %s (preset=%s backend=%s seed=%llu)\n", bytes.size(),
              out.c_str(), preset.c_str(), backend.c_str(), static_cast<unsigned long long>(seed));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving event-triggered HVAC control pipeline"};
  app.require_subcommand(1);

  std::string preset = "paper-2024";
  std::string backend = "rlwe";
  uint64_t seed = 1;
  std::string out = "keys.bin";

  auto* kg = app.add_subcommand("keygen", "Generate and store a key set");
  kg->add_option("--preset", preset, "Parameter preset (paper-2024 | deep-6)");
  kg->add_option("--backend", backend, "Backend (rlwe | reference)");
  kg->add_option("--seed", seed, "Key generation seed");
  kg->add_option("--out", out, "Output file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (kg->parsed()) return run_keygen(preset, backend, seed, out);
  } catch (const enchvac::he::HeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime failure: %s\n", e.what());
    return 2;
  }
  return 1;
}
