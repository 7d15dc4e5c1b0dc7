#include "ionsense/ionf_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "ionsense/errors.hpp"

namespace ionsense {

using nlohmann::json;

namespace {

constexpr double uint32_ceiling = 4294967295.0;

json meta_to_json(const Frame& f) {
    json j;
    j["format"] = "IONF";
    j["version"] = 1;
    j["width"] = f.width;
    j["height"] = f.height;
    j["timestamp_s"] = f.meta.timestamp_s;
    j["exposure_s"] = f.meta.exposure_s;
    j["object_pixel_nm"] = f.meta.object_pixel_nm;
    j["chop"] = f.meta.chop == ChopState::force_on ? "on" : "off";
    j["master_seed"] = f.meta.master_seed;
    j["frame_index"] = f.meta.frame_index;
    j["truncation_warning"] = f.meta.truncation_warning;
    j["saturated"] = f.meta.saturated;
    j["provenance"] = f.meta.provenance;
    return j;
}

void meta_from_json(const json& j, Frame& f) {
    if (j.value("format", "") != "IONF" || j.value("version", 0) != 1) {
        throw DataError("not an IONF v1 header");
    }
    f.width = j.at("width").get<int>();
    f.height = j.at("height").get<int>();
    if (f.width <= 0 || f.height <= 0) throw DataError("IONF header has non-positive dimensions");
    f.meta.timestamp_s = j.at("timestamp_s").get<double>();
    f.meta.exposure_s = j.at("exposure_s").get<double>();
    f.meta.object_pixel_nm = j.at("object_pixel_nm").get<double>();
    f.meta.chop = j.at("chop").get<std::string>() == "on" ? ChopState::force_on : ChopState::force_off;
    f.meta.master_seed = j.at("master_seed").get<std::uint64_t>();
    f.meta.frame_index = j.at("frame_index").get<std::uint64_t>();
    f.meta.truncation_warning = j.at("truncation_warning").get<bool>();
    f.meta.saturated = j.at("saturated").get<bool>();
    f.meta.provenance = j.at("provenance").get<std::string>();
}

void put_u32_le(std::ostream& os, std::uint32_t v) {
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(v & 0xff),
        static_cast<unsigned char>((v >> 8) & 0xff),
        static_cast<unsigned char>((v >> 16) & 0xff),
        static_cast<unsigned char>((v >> 24) & 0xff),
    };
    os.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32_le(std::istream& is) {
    unsigned char bytes[4];
    is.read(reinterpret_cast<char*>(bytes), 4);
    if (!is) throw DataError("IONF pixel payload is truncated");
    return static_cast<std::uint32_t>(bytes[0]) |
           (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

} // namespace

void write_ionf(const std::filesystem::path& path, const Frame& frame) {
    if (frame.width <= 0 || frame.height <= 0 ||
        frame.pixels.size() != static_cast<std::size_t>(frame.width) * frame.height) {
        throw InvalidInput("frame dimensions do not match its pixel buffer");
    }

    // quantization to the storage type happens here; values past the
    // uint32 ceiling clamp and flag
    Frame header = frame;
    std::vector<std::uint32_t> quantized(frame.pixels.size());
    for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
        double v = std::round(frame.pixels[i]);
        if (v < 0.0) v = 0.0;
        if (v > uint32_ceiling) {
            v = uint32_ceiling;
            header.meta.saturated = true;
        }
        quantized[i] = static_cast<std::uint32_t>(v);
    }

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << meta_to_json(header).dump() << '\n';
    for (std::uint32_t v : quantized) put_u32_le(os, v);
    os.flush();
    if (!os) throw IoError("write to " + path.string() + " failed");
}

Frame read_ionf(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());

    std::string header_line;
    if (!std::getline(is, header_line)) throw DataError("IONF header line is missing in " + path.string());

    Frame f;
    try {
        meta_from_json(json::parse(header_line), f);
    } catch (const json::exception& e) {
        throw DataError("malformed IONF header in " + path.string() + ": " + e.what());
    }

    const std::size_t n = static_cast<std::size_t>(f.width) * f.height;
    f.pixels.resize(n);
    try {
        for (std::size_t i = 0; i < n; ++i) f.pixels[i] = static_cast<double>(get_u32_le(is));
    } catch (const DataError&) {
        throw DataError("IONF pixel payload is truncated in " + path.string());
    }

    // trailing bytes mean the header and payload disagree
    char extra;
    if (is.read(&extra, 1)) throw DataError("IONF payload longer than header declares in " + path.string());
    return f;
}

namespace {

json schedule_to_json(const ChopSchedule& s) {
    return json{{"integration_time_s", s.integration_time_s},
                {"n_cycles", s.n_cycles},
                {"applied_displacement_nm", s.applied_displacement_nm}};
}

ChopSchedule schedule_from_json(const json& j) {
    ChopSchedule s;
    s.integration_time_s = j.at("integration_time_s").get<double>();
    s.n_cycles = j.at("n_cycles").get<int>();
    s.applied_displacement_nm = j.at("applied_displacement_nm").get<std::array<double, 3>>();
    return s;
}

json camera_to_json(const CameraConfig& c) {
    return json{{"pixel_pitch_image_um", c.pixel_pitch_image_um},
                {"roi_width", c.roi_width},
                {"roi_height", c.roi_height},
                {"exposure_s", c.exposure_s},
                {"background_rate", c.background_rate},
                {"em_gain_model", c.em_gain_model == EmGainModel::none ? "none" : "multiplicative_excess"}};
}

CameraConfig camera_from_json(const json& j) {
    CameraConfig c;
    c.pixel_pitch_image_um = j.at("pixel_pitch_image_um").get<double>();
    c.roi_width = j.at("roi_width").get<int>();
    c.roi_height = j.at("roi_height").get<int>();
    c.exposure_s = j.at("exposure_s").get<double>();
    c.background_rate = j.at("background_rate").get<double>();
    c.em_gain_model = j.at("em_gain_model").get<std::string>() == "none"
                          ? EmGainModel::none
                          : EmGainModel::multiplicative_excess;
    return c;
}

json scene_to_json(const Scene& s) {
    return json{{"ion_position_nm", s.ion_position_nm},
                {"expected_photons", s.expected_photons},
                {"optics",
                 {{"wavelength_nm", s.optics.wavelength_nm},
                  {"numerical_aperture", s.optics.numerical_aperture},
                  {"magnification", s.optics.magnification},
                  {"defocus_offset_nm", s.optics.defocus_offset_nm}}},
                {"geometry",
                 {{"waist_w0_nm", s.geometry.waist_w0_nm},
                  {"fwhm_nm", s.geometry.fwhm_nm},
                  {"rayleigh_range_nm", s.geometry.rayleigh_range_nm}}}};
}

Scene scene_from_json(const json& j) {
    Scene s;
    s.ion_position_nm = j.at("ion_position_nm").get<std::array<double, 3>>();
    s.expected_photons = j.at("expected_photons").get<double>();
    const json& o = j.at("optics");
    s.optics.wavelength_nm = o.at("wavelength_nm").get<double>();
    s.optics.numerical_aperture = o.at("numerical_aperture").get<double>();
    s.optics.magnification = o.at("magnification").get<double>();
    s.optics.defocus_offset_nm = o.at("defocus_offset_nm").get<double>();
    const json& g = j.at("geometry");
    s.geometry.waist_w0_nm = g.at("waist_w0_nm").get<double>();
    s.geometry.fwhm_nm = g.at("fwhm_nm").get<double>();
    s.geometry.rayleigh_range_nm = g.at("rayleigh_range_nm").get<double>();
    return s;
}

json drift_to_json(const DriftModel& d) {
    return json{{"linear_nm_per_hour", d.linear_nm_per_hour},
                {"random_walk_nm_per_sqrt_hour", d.random_walk_nm_per_sqrt_hour},
                {"seed", d.seed}};
}

DriftModel drift_from_json(const json& j) {
    DriftModel d;
    d.linear_nm_per_hour = j.at("linear_nm_per_hour").get<std::array<double, 3>>();
    d.random_walk_nm_per_sqrt_hour = j.at("random_walk_nm_per_sqrt_hour").get<std::array<double, 3>>();
    d.seed = j.at("seed").get<std::uint64_t>();
    return d;
}

} // namespace

void write_series(const std::filesystem::path& dir, const FrameSeries& series,
                  const std::string& extra_json) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create series directory " + dir.string());

    json manifest;
    manifest["format"] = "IONF-series";
    manifest["version"] = 1;
    manifest["master_seed"] = series.master_seed;
    manifest["noiseless"] = series.noiseless;
    manifest["schedule"] = schedule_to_json(series.schedule);
    manifest["camera"] = camera_to_json(series.camera);
    manifest["base_scene"] = scene_to_json(series.base_scene);
    manifest["drift"] = drift_to_json(series.drift);

    std::vector<std::string> names;
    names.reserve(series.frames.size());
    for (std::size_t i = 0; i < series.frames.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "frame_%04zu.ionf", i);
        names.emplace_back(buf);
        write_ionf(dir / names.back(), series.frames[i]);
    }
    manifest["frames"] = names;
    if (!extra_json.empty()) {
        try {
            manifest["config"] = json::parse(extra_json);
        } catch (const json::exception& e) {
            throw InvalidInput(std::string("extra manifest JSON is malformed: ") + e.what());
        }
    }

    std::ofstream os(dir / "series.json", std::ios::trunc);
    if (!os) throw IoError("cannot write series manifest in " + dir.string());
    os << manifest.dump(2) << '\n';
    os.flush();
    if (!os) throw IoError("write to series manifest failed in " + dir.string());
}

namespace {

json load_manifest(const std::filesystem::path& dir) {
    std::ifstream is(dir / "series.json");
    if (!is) throw IoError("cannot open series manifest " + (dir / "series.json").string());
    json manifest;
    try {
        is >> manifest;
    } catch (const json::exception& e) {
        throw DataError("malformed series manifest in " + dir.string() + ": " + e.what());
    }
    if (manifest.value("format", "") != "IONF-series" || manifest.value("version", 0) != 1) {
        throw DataError("not an IONF-series v1 manifest: " + (dir / "series.json").string());
    }
    return manifest;
}

} // namespace

FrameSeries read_series(const std::filesystem::path& dir) {
    const json manifest = load_manifest(dir);

    FrameSeries series;
    try {
        series.master_seed = manifest.at("master_seed").get<std::uint64_t>();
        series.noiseless = manifest.at("noiseless").get<bool>();
        series.schedule = schedule_from_json(manifest.at("schedule"));
        series.camera = camera_from_json(manifest.at("camera"));
        series.base_scene = scene_from_json(manifest.at("base_scene"));
        series.drift = drift_from_json(manifest.at("drift"));
        for (const auto& name : manifest.at("frames")) {
            series.frames.push_back(read_ionf(dir / name.get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw DataError("series manifest in " + dir.string() + " is missing fields: " + e.what());
    }
    return series;
}

std::string read_series_config(const std::filesystem::path& dir) {
    const json manifest = load_manifest(dir);
    if (!manifest.contains("config")) return "";
    return manifest.at("config").dump();
}

} // namespace ionsense
