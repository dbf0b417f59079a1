#pragma once

// Runs the anydoor binary through the shell and captures exit code and output.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifndef ANYDOOR_CLI
#error "ANYDOOR_CLI must name the anydoor executable"
#endif

namespace cli {

struct Result {
  int code = -1;
  std::string out;  // stdout and stderr interleaved
};

inline std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'') q += "'\\''";
    else q += c;
  }
  return q + "'";
}

inline Result run(const std::vector<std::string>& args, const std::string& env = "") {
  static int counter = 0;
  const auto log = std::filesystem::temp_directory_path() /
                   ("anydoor_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".log");
  std::string cmd = env.empty() ? "" : env + " ";
  cmd += quote(ANYDOOR_CLI);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " > " + quote(log.string()) + " 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(log);
  std::ostringstream ss;
  ss << is.rdbuf();
  r.out = ss.str();
  std::filesystem::remove(log);
  return r;
}

inline std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Small model so CLI runs finish quickly.
inline std::string small_config() {
  return "image_side = 16\n"
         "base_width = 8\n"
         "channel_mult = 1,2\n"
         "token_width = 8\n"
         "attn_dim = 8\n"
         "time_dim = 8\n"
         "backbone_side = 16\n"
         "backbone_patch = 4\n"
         "backbone_width = 8\n"
         "T = 100\n"
         "boundary = 50\n"
         "sampler_steps = 2\n";
}

}  // namespace cli
