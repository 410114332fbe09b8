#pragma once

#include <string>

#include "slt/model.hpp"

namespace slt {

// Shortest round-trip decimal encoding; all file output goes through this so
// reruns are byte-identical.
std::string format_double(double x);

// Dataset CSV: header x1,...,xN then one observation per row.  The manifest
// (written next to the CSV as <path>.manifest.json) records model, n, seed.
void write_dataset_csv(const Dataset& d, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// FNV-1a 64-bit content hash, hex encoded; used by experiment manifests.
std::string fnv1a_hex(const std::string& content);

}  // namespace slt
