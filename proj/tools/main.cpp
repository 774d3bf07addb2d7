#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "msglab/scenarios.hpp"

namespace {

using msglab::scenarios::kDefaultSeed;

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitUsage = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

// NAME resolves to a built-in; anything else is read as a config file.
msglab::session::PolicyProfile resolve_profile(const std::string& spec) {
  auto names = msglab::session::builtin_profile_names();
  for (const auto& n : names)
    if (n == spec) return msglab::session::builtin_profile(spec);
  return msglab::session::parse_profile(read_file(spec));
}

int cmd_matrix(std::uint64_t seed, const std::vector<std::string>& profile_args,
               const std::string& format, const std::string& fixture_path,
               const std::string& dump_path) {
  std::vector<msglab::session::PolicyProfile> profiles;
  bool custom = !profile_args.empty();
  if (custom) {
    for (const auto& spec : profile_args)
      profiles.push_back(resolve_profile(spec));
  } else {
    for (const auto& name : msglab::session::builtin_profile_names())
      profiles.push_back(msglab::session::builtin_profile(name));
  }

  auto matrix = msglab::scenarios::build_matrix(profiles, seed);
  std::string rendered = format == "structured" ? matrix.render_structured()
                                                : matrix.render_text();
  std::cout << rendered;
  if (!dump_path.empty()) write_file(dump_path, rendered);
  if (custom) return kExitOk;  // no fixture comparison for custom profiles

  std::string fixture = fixture_path.empty()
                            ? msglab::scenarios::expected_matrix_fixture()
                            : read_file(fixture_path);
  auto cmp = msglab::scenarios::compare_matrix(matrix, fixture);
  if (cmp.match) {
    std::cout << "fixture: match\n";
    return kExitOk;
  }
  for (const auto& m : cmp.mismatches) std::cout << "mismatch: " << m << "\n";
  return kExitMismatch;
}

int cmd_scenario(const std::string& name, std::uint64_t seed,
                 const std::string& profile_arg, const std::string& format,
                 const std::string& dump_path) {
  auto profile = resolve_profile(profile_arg);
  auto report = msglab::scenarios::run_scenario(name, profile, seed);
  std::cout << (format == "structured" ? report.render_structured()
                                       : report.render_text());
  if (!dump_path.empty()) {
    std::ostringstream out;
    if (name == "otr-transcript") {
      for (const auto& line : report.notes) out << line << '\n';
    } else {
      for (const auto& line : report.net_log) out << line << '\n';
    }
    write_file(dump_path, out.str());
  }
  return kExitOk;
}

int cmd_forge(const std::string& transcript_path, const std::string& payload,
              const std::string& mode_name) {
  std::string transcript = read_file(transcript_path);
  auto mode = mode_name == "xor" ? msglab::otr::ForgeMode::kXorDelta
                                 : msglab::otr::ForgeMode::kWholeMessage;
  msglab::crypto::CryptoSuite suite(msglab::to_bytes("forge-cli"));
  try {
    auto demo = msglab::scenarios::forge_from_transcript(
        suite, transcript, msglab::to_bytes(payload), mode);
    std::cout << "mk=" << msglab::hex_encode(demo.mk) << "\n"
              << "forged=" << msglab::hex_encode(demo.forged.serialize())
              << "\n"
              << "verifies=" << (demo.verifies ? "yes" : "no") << "\n";
    return demo.verifies ? kExitOk : kExitMismatch;
  } catch (const msglab::RefusesToForgeUnpublished& e) {
    std::cout << "RefusesToForgeUnpublished: " << e.what() << "\n";
    return kExitMismatch;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"secure-messaging protocol laboratory"};
  app.require_subcommand(1);
  app.fallthrough();  // allow the global options after the subcommand name

  std::uint64_t seed = kDefaultSeed;
  std::string format = "text";
  std::string dump_path;
  std::string fixture_path;
  app.add_option("--seed", seed, "deterministic seed");
  app.add_option("--format", format, "text | structured")
      ->check(CLI::IsMember({"text", "structured"}));
  app.add_option("--dump", dump_path, "write transcript/log to PATH");
  app.add_option("--fixture", fixture_path, "expected-matrix fixture PATH");

  auto* matrix = app.add_subcommand("matrix", "run all scenarios, print the property matrix");
  matrix->fallthrough();
  std::vector<std::string> matrix_profiles;
  matrix->add_option("--profile", matrix_profiles,
                     "profile NAME|FILE (repeatable; default: all built-ins)");

  auto* scenario = app.add_subcommand("scenario", "run one scenario");
  scenario->fallthrough();
  std::string scenario_name;
  std::string scenario_profile = "signal-like";
  scenario->add_option("name", scenario_name, "scenario name")->required();
  scenario->add_option("--profile", scenario_profile, "profile NAME|FILE");

  auto* forge = app.add_subcommand("forge", "forge a message from a recorded transcript");
  forge->fallthrough();
  std::string transcript_path;
  std::string payload = "forged content";
  std::string mode_name = "whole";
  forge->add_option("--transcript", transcript_path, "recorded transcript PATH")
      ->required();
  forge->add_option("--payload", payload, "forged plaintext/ciphertext bytes");
  forge->add_option("--mode", mode_name, "whole | xor")
      ->check(CLI::IsMember({"whole", "xor"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (matrix->parsed())
      return cmd_matrix(seed, matrix_profiles, format, fixture_path, dump_path);
    if (scenario->parsed()) {
      auto names = msglab::scenarios::scenario_names();
      if (std::find(names.begin(), names.end(), scenario_name) == names.end()) {
        std::cerr << "unknown scenario: " << scenario_name << "\n";
        return kExitUsage;
      }
      return cmd_scenario(scenario_name, seed, scenario_profile, format,
                          dump_path);
    }
    if (forge->parsed()) return cmd_forge(transcript_path, payload, mode_name);
  } catch (const msglab::BadProfile& e) {
    std::cerr << "profile error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
