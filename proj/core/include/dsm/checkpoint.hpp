#pragma once

#include <iosfwd>
#include <string>

#include "dsm/stereo_model.hpp"

namespace dsm {

/// Binary model container:
///   "DSMK1"
///   u32 length, config text (`key = value` lines)
///   u32 entry count, then per entry:
///     u32 name length, name, u32 rank, rank x u64 extents,
///     product(extents) x f64 values
/// All integers and floats are little-endian. Batch-norm running statistics
/// are stored as extra entries "<site>.running_mean" / "<site>.running_var".
void write_checkpoint(std::ostream& os, const StereoModel& model);
StereoModel read_checkpoint(std::istream& is);

void save_checkpoint(const std::string& path, const StereoModel& model);
StereoModel load_checkpoint(const std::string& path);

}  // namespace dsm
