// Copyright 2026 The DIA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Misbehaving-on-demand detector plugin for channel tests.
//
//   fake_detector <mode> <detector_id> [p_fake | transcript_path]
//
// modes: good, prefix, transcript, out_of_range, garbage, extra_key, error,
// hang, crash, bad_hello. "transcript" scores like "prefix" and appends every
// request line it receives to the given file.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include "json.hpp"

int main(int argc, char** argv) {
  if (argc < 3) return 64;
  std::string mode = argv[1];
  std::string id = argv[2];
  double p = argc > 3 ? std::atof(argv[3]) : 0.5;
  std::ofstream transcript;
  if (mode == "transcript" && argc > 3) transcript.open(argv[3], std::ios::app);
  std::string line;
  while (std::getline(std::cin, line)) {
    if (transcript.is_open()) transcript << line << '\n' << std::flush;
    auto req = nlohmann::json::parse(line, nullptr, false);
    if (req.is_discarded() || !req.is_object()) {
      std::cout << R"({"error":"malformed request"})" << std::endl;
      continue;
    }
    nlohmann::ordered_json out;
    if (req.value("op", "") == "hello") {
      out["detector_id"] = id;
      out["protocol"] = mode == "bad_hello" ? 2 : 1;
      std::cout << out.dump() << std::endl;
      continue;
    }
    std::string probe = req.value("probe_id", "");
    if (mode == "hang") {
      std::this_thread::sleep_for(std::chrono::seconds(60));
      return 0;
    }
    if (mode == "crash") return 3;
    if (mode == "garbage") {
      std::cout << "this is not json" << std::endl;
      continue;
    }
    if (mode == "error") {
      std::cout << R"({"error":"model failed"})" << std::endl;
      continue;
    }
    out["probe_id"] = probe;
    out["detector_id"] = id;
    if (mode == "out_of_range") {
      out["p_fake"] = 1.3;
    } else if (mode == "prefix" || mode == "transcript") {
      out["p_fake"] = !probe.empty() && probe[0] == 'f' ? 1.0 : 0.0;
    } else {
      out["p_fake"] = p;
    }
    if (mode == "extra_key") out["note"] = "x";
    std::cout << out.dump() << std::endl;
  }
  return 0;
}
