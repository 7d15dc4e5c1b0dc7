#pragma once

#include <filesystem>

#include "ionsense/image_sim.hpp"

namespace ionsense {

/// IONF v1 frame container: one line of JSON metadata terminated by '\n',
/// followed by width * height little-endian unsigned 32-bit pixel values,
/// row-major. Values above the uint32 ceiling are clamped and flagged.
void write_ionf(const std::filesystem::path& path, const Frame& frame);
Frame read_ionf(const std::filesystem::path& path);

/// A series directory holds frame_NNNN.ionf files plus series.json, which
/// records the schedule, camera, base scene, drift model, seed and the frame
/// file list. `extra_json` (if nonempty) is embedded verbatim under "config"
/// so an analysis run can recover the generating configuration.
void write_series(const std::filesystem::path& dir, const FrameSeries& series,
                  const std::string& extra_json = "");
FrameSeries read_series(const std::filesystem::path& dir);

/// The raw "config" blob stored in series.json ("" when absent).
std::string read_series_config(const std::filesystem::path& dir);

} // namespace ionsense
