#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kinv/problem.hpp"

namespace kinv {

/// Record of one CLI run. Every listed artifact exists on disk when the
/// run returns; the manifest itself (manifest.json) carries the wall time
/// and is not part of the artifact list.
struct RunManifest {
    std::string command;
    std::string config_path;
    std::string output_dir;
    double wall_time = 0.0;
    std::vector<std::string> artifacts;
    std::string exit_status = "ok"; // ok | validation_failed | solver_failed | io_failed
    int exit_code = 0;              // 0 | 2 | 3 | 4
    std::string message;
};

struct RunOptions {
    int threads = 0;           // 0 = hardware default
    bool strict_override = false;
    bool strict = false;
};

/// Solve the direct problem of a config: writes u.bin, norms.json and
/// forward_report.json into `out`.
RunManifest run_forward(const std::filesystem::path& config, const std::filesystem::path& out,
                        const RunOptions& opts = {});

/// Solve the configured inverse problem: writes control.csv, control.bin,
/// state.bin, newton_report.json and residual_history.csv.
RunManifest run_inverse(const std::filesystem::path& config, const std::filesystem::path& out,
                        const RunOptions& opts = {});

/// Verification suites: "mms", "oracle", "stability", "alpha". Each
/// writes CSV tables plus a pass/fail summary.json; a failing hard check
/// maps to exit code 3.
RunManifest run_verify(const std::string& suite, const std::filesystem::path& config,
                       const std::filesystem::path& out, const RunOptions& opts = {});

void write_manifest(const std::filesystem::path& out, const RunManifest& manifest);

} // namespace kinv
