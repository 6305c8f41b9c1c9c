// SPDX-License-Identifier: Apache-2.0

#include "einv/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <zlib.h>

namespace einv {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

template <typename U>
void put(std::string& out, U value) {
    char buf[sizeof(U)];
    std::memcpy(buf, &value, sizeof(U));
    out.append(buf, sizeof(U));
}

template <typename U>
U get(const std::string& in, std::size_t& pos, const char* what) {
    if (pos + sizeof(U) > in.size()) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
    U v;
    std::memcpy(&v, in.data() + pos, sizeof(U));
    pos += sizeof(U);
    return v;
}

// Value of `key` in the header's Python dict literal, up to the next
// top-level comma or closing brace.
std::string header_field(const std::string& header, const std::string& key) {
    const std::size_t k = header.find("'" + key + "'");
    if (k == std::string::npos) throw NpyError("npy header has no '" + key + "' field");
    std::size_t p = header.find(':', k);
    if (p == std::string::npos) throw NpyError("malformed npy header near '" + key + "'");
    ++p;
    while (p < header.size() && header[p] == ' ') ++p;
    std::size_t end = p;
    int depth = 0;
    for (; end < header.size(); ++end) {
        const char c = header[end];
        if (c == '(') ++depth;
        else if (c == ')') --depth;
        else if ((c == ',' || c == '}') && depth == 0) break;
    }
    std::string v = header.substr(p, end - p);
    while (!v.empty() && v.back() == ' ') v.pop_back();
    return v;
}

Shape parse_shape(const std::string& text) {
    if (text.size() < 2 || text.front() != '(' || text.back() != ')') throw NpyError("malformed npy shape " + text);
    Shape shape;
    std::string item;
    std::istringstream ss(text.substr(1, text.size() - 2));
    while (std::getline(ss, item, ',')) {
        item.erase(std::remove(item.begin(), item.end(), ' '), item.end());
        if (item.empty()) continue;
        std::size_t used = 0;
        const unsigned long long v = std::stoull(item, &used);
        if (used != item.size()) throw NpyError("malformed npy shape entry '" + item + "'");
        shape.push_back(static_cast<std::size_t>(v));
    }
    return shape;
}

}  // namespace

std::string npy_header(const Shape& shape, NpyElement element) {
    std::string dict = "{'descr': '";
    dict += element == NpyElement::f4 ? "<f4" : "<f8";
    dict += "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        dict += std::to_string(shape[i]);
        if (shape.size() == 1 || i + 1 < shape.size()) dict += ",";
        if (i + 1 < shape.size()) dict += " ";
    }
    dict += "), }";
    // 6 magic + 2 version + 2 length bytes precede the dict; the newline ends it.
    const std::size_t unpadded = 10 + dict.size() + 1;
    const std::size_t total = (unpadded + 63) / 64 * 64;
    dict.append(total - unpadded, ' ');
    dict += '\n';
    std::string out = "\x93NUMPY";
    out += '\x01';
    out += '\x00';
    put<std::uint16_t>(out, static_cast<std::uint16_t>(dict.size()));
    return out + dict;
}

void write_npy(const Tensor& tensor, const std::filesystem::path& path, NpyElement element) {
    std::string bytes = npy_header(tensor.shape(), element);
    if (element == NpyElement::f4) {
        bytes.append(reinterpret_cast<const char*>(tensor.data()), tensor.size() * sizeof(float));
    } else {
        for (float v : tensor.values()) put<double>(bytes, static_cast<double>(v));
    }
    write_file(path, bytes);
}

Tensor read_npy(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 10 || bytes.compare(0, 6, "\x93NUMPY") != 0) {
        throw NpyBadMagicError(path.string() + ": not an npy file (bad magic)");
    }
    if (bytes[6] != '\x01' || bytes[7] != '\x00') {
        throw NpyError(path.string() + ": only npy format version 1.0 is supported");
    }
    std::uint16_t header_len;
    std::memcpy(&header_len, bytes.data() + 8, 2);
    if (10u + header_len > bytes.size()) throw NpyTruncatedError(path.string() + ": header truncated");
    const std::string header = bytes.substr(10, header_len);

    const std::string descr = header_field(header, "descr");
    std::size_t element_size;
    if (descr == "'<f4'") element_size = 4;
    else if (descr == "'<f8'") element_size = 8;
    else throw NpyUnsupportedDtypeError(path.string() + ": unsupported dtype " + descr + " (only <f4 and <f8)");

    const std::string fortran = header_field(header, "fortran_order");
    if (fortran == "True") throw NpyFortranOrderError(path.string() + ": fortran_order=True arrays are not supported");
    if (fortran != "False") throw NpyError(path.string() + ": malformed fortran_order " + fortran);

    const Shape shape = parse_shape(header_field(header, "shape"));
    const std::size_t count = shape_numel(shape);
    const std::size_t offset = 10u + header_len;
    if (bytes.size() - offset < count * element_size) {
        throw NpyTruncatedError(path.string() + ": payload has " + std::to_string(bytes.size() - offset) +
                                " bytes, expected " + std::to_string(count * element_size));
    }
    std::vector<float> data(count);
    if (element_size == 4) {
        std::memcpy(data.data(), bytes.data() + offset, count * 4);
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            double v;
            std::memcpy(&v, bytes.data() + offset + i * 8, 8);
            data[i] = static_cast<float>(v);
        }
    }
    return Tensor(shape, std::move(data));
}

std::uint32_t crc32(const void* data, std::size_t size) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    const auto* p = static_cast<const Bytef*>(data);
    while (size > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        crc = ::crc32(crc, p, chunk);
        p += chunk;
        size -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

namespace {

struct BlobRef {
    std::string name;
    const Tensor* tensor;
};

std::vector<BlobRef> blobs_of(const Layer<float>& l) {
    std::vector<BlobRef> out;
    if (l.conv) {
        out.push_back({"weights", &l.conv->weights});
        if (l.conv->bias) out.push_back({"bias", &*l.conv->bias});
    }
    if (l.bn) {
        out.push_back({"gamma", &l.bn->gamma});
        out.push_back({"beta", &l.bn->beta});
        out.push_back({"running_mean", &l.bn->running_mean});
        out.push_back({"running_var", &l.bn->running_var});
    }
    return out;
}

Tensor* blob_slot(Layer<float>& l, const std::string& name) {
    if (name == "weights" && l.conv) return &l.conv->weights;
    if (name == "bias" && l.conv && l.conv->bias) return &*l.conv->bias;
    if (l.bn) {
        if (name == "gamma") return &l.bn->gamma;
        if (name == "beta") return &l.bn->beta;
        if (name == "running_mean") return &l.bn->running_mean;
        if (name == "running_var") return &l.bn->running_var;
    }
    return nullptr;
}

}  // namespace

std::string encode_checkpoint(const NetworkGraph& net) {
    json tensors = json::array();
    for (const auto& l : net.layers()) {
        for (const auto& b : blobs_of(l)) {
            tensors.push_back(json{{"layer", l.spec.index}, {"name", b.name}, {"shape", b.tensor->shape()}});
        }
    }
    const json manifest{{"format", "einv-checkpoint"}, {"architecture", net.to_config()}, {"tensors", tensors}};
    const std::string text = manifest.dump();
    std::string out = "EINV";
    put<std::uint16_t>(out, kCheckpointVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    for (const auto& l : net.layers()) {
        for (const auto& b : blobs_of(l)) {
            out.append(reinterpret_cast<const char*>(b.tensor->data()), b.tensor->size() * sizeof(float));
        }
    }
    put<std::uint32_t>(out, crc32(out.data(), out.size()));
    return out;
}

NetworkGraph decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < 14 || bytes.compare(0, 4, "EINV") != 0) throw CheckpointError("not an EINV checkpoint");
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
    const std::uint32_t actual = crc32(bytes.data(), bytes.size() - 4);
    if (stored != actual) throw ChecksumError("checkpoint CRC-32 mismatch: file corrupted");
    std::size_t pos = 4;
    const auto version = get<std::uint16_t>(bytes, pos, "version");
    if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const auto manifest_len = get<std::uint32_t>(bytes, pos, "manifest length");
    if (pos + manifest_len > bytes.size() - 4) throw CheckpointError("checkpoint manifest truncated");
    const json manifest = json::parse(bytes.substr(pos, manifest_len));
    pos += manifest_len;

    NetworkGraph net = NetworkGraph::from_config(manifest.at("architecture"));
    auto& layers = net.mutable_layers();
    std::size_t expected_blobs = 0;
    for (const auto& l : layers) expected_blobs += blobs_of(l).size();
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != expected_blobs) {
        throw CheckpointError("manifest lists " + std::to_string(tensors.size()) + " tensors but the architecture needs " +
                              std::to_string(expected_blobs));
    }
    for (const auto& t : tensors) {
        const auto layer = t.at("layer").get<std::size_t>();
        const auto name = t.at("name").get<std::string>();
        const Shape shape = t.at("shape").get<Shape>();
        if (layer == 0 || layer > layers.size()) throw CheckpointError("manifest references missing layer " + std::to_string(layer));
        Tensor* slot = blob_slot(layers[layer - 1], name);
        if (!slot) throw CheckpointError("manifest tensor '" + name + "' has no slot in layer " + std::to_string(layer));
        if (slot->shape() != shape) {
            throw CheckpointError("manifest shape " + shape_str(shape) + " for layer " + std::to_string(layer) + " " + name +
                                  " disagrees with architecture " + shape_str(slot->shape()));
        }
        const std::size_t n = slot->size() * sizeof(float);
        if (pos + n > bytes.size() - 4) throw CheckpointError("checkpoint blob data truncated");
        std::memcpy(slot->data(), bytes.data() + pos, n);
        pos += n;
    }
    if (pos != bytes.size() - 4) throw CheckpointError("checkpoint has trailing bytes after the blobs");
    net.validate();
    return net;
}

void save_checkpoint(const NetworkGraph& net, const std::filesystem::path& path) {
    write_file(path, encode_checkpoint(net));
}

NetworkGraph load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

void SyntheticTask::validate() const {
    if (map_h < 2 || map_w < 1) throw std::invalid_argument("synthetic map must be at least 2 x 1");
    if (min_layers < 1 || max_layers < min_layers || max_layers > map_h) {
        throw std::invalid_argument("synthetic layer-count range must satisfy 1 <= min <= max <= map height");
    }
    if (!(v_max > v_min)) throw std::invalid_argument("synthetic velocity range must be increasing");
    if (channels < 1 || time < 1 || receivers < 1) throw std::invalid_argument("synthetic input grid must be nonempty");
    if (noise < 0.0 || max_tilt < 0.0) throw std::invalid_argument("synthetic noise and tilt must be >= 0");
}

json SyntheticTask::to_json() const {
    return json{{"seed", seed},         {"map", {map_h, map_w}},           {"layers", {min_layers, max_layers}},
                {"velocity", {v_min, v_max}}, {"max_tilt", max_tilt},     {"channels", channels},
                {"time", time},         {"receivers", receivers},          {"gain", gain},
                {"noise", noise}};
}

SyntheticTask SyntheticTask::from_json(const json& j) {
    SyntheticTask t;
    t.seed = j.value("seed", t.seed);
    if (j.contains("map")) {
        t.map_h = j["map"].at(0).get<std::size_t>();
        t.map_w = j["map"].at(1).get<std::size_t>();
    }
    if (j.contains("layers")) {
        t.min_layers = j["layers"].at(0).get<std::size_t>();
        t.max_layers = j["layers"].at(1).get<std::size_t>();
    }
    if (j.contains("velocity")) {
        t.v_min = j["velocity"].at(0).get<double>();
        t.v_max = j["velocity"].at(1).get<double>();
    }
    t.max_tilt = j.value("max_tilt", t.max_tilt);
    t.channels = j.value("channels", t.channels);
    t.time = j.value("time", t.time);
    t.receivers = j.value("receivers", t.receivers);
    t.gain = j.value("gain", t.gain);
    t.noise = j.value("noise", t.noise);
    t.validate();
    return t;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
    return Dataset{slice_batch(inputs, begin, end), slice_batch(targets, begin, end)};
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

class Uniform {
public:
    explicit Uniform(std::uint64_t seed) : engine_(seed) {}
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double range(double lo, double hi) { return lo + (hi - lo) * unit(); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

private:
    std::mt19937_64 engine_;
};

}  // namespace

Dataset gen_synthetic(const SyntheticTask& task, std::size_t count, std::size_t first) {
    task.validate();
    if (count < 1) throw std::invalid_argument("gen_synthetic needs count >= 1");
    const std::size_t h = task.map_h, w = task.map_w, C = task.channels, T = task.time, R = task.receivers;

    // Projection from a depth column to each (channel, time) sample; fixed per task seed.
    Uniform proj_rng(splitmix64(task.seed ^ 0x5EED5EEDull));
    std::vector<double> projection(C * T * h);
    const double scale = std::sqrt(3.0 / static_cast<double>(h));
    for (auto& a : projection) a = proj_rng.range(-scale, scale);

    Dataset d{Tensor({count, C, T, R}), Tensor({count, 1, h, w})};
    std::vector<double> map(h * w);
    for (std::size_t s = 0; s < count; ++s) {
        Uniform rng(splitmix64(task.seed * 0x100000001B3ull + first + s));
        const std::size_t layers = task.min_layers + rng.index(task.max_layers - task.min_layers + 1);
        // Distinct interface rows in 1..h-1, sorted.
        std::vector<std::size_t> rows(h - 1);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i + 1;
        for (std::size_t i = 0; i + 1 < layers; ++i) std::swap(rows[i], rows[i + rng.index(rows.size() - i)]);
        std::vector<std::size_t> interfaces(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(layers - 1));
        std::sort(interfaces.begin(), interfaces.end());
        // Stratified draws keep velocities strictly increasing with depth.
        std::vector<double> velocity(layers);
        for (std::size_t k = 0; k < layers; ++k) {
            velocity[k] = task.v_min + (task.v_max - task.v_min) * (static_cast<double>(k) + rng.unit()) /
                                           static_cast<double>(layers);
        }
        const double tilt = rng.range(-task.max_tilt, task.max_tilt);
        const double centre = (static_cast<double>(w) - 1.0) / 2.0;
        float* target = d.targets.data() + s * h * w;
        for (std::size_t x = 0; x < w; ++x) {
            const double shift = tilt * (static_cast<double>(x) - centre);
            for (std::size_t z = 0; z < h; ++z) {
                std::size_t layer = 0;
                for (auto depth : interfaces) {
                    if (static_cast<double>(z) >= static_cast<double>(depth) + shift) ++layer;
                }
                const double v = velocity[layer];
                map[z * w + x] = 2.0 * (v - task.v_min) / (task.v_max - task.v_min) - 1.0;
                target[z * w + x] = static_cast<float>(map[z * w + x]);
            }
        }
        float* input = d.inputs.data() + s * C * T * R;
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t t = 0; t < T; ++t) {
                const double* a = projection.data() + (c * T + t) * h;
                for (std::size_t r = 0; r < R; ++r) {
                    const std::size_t x = r * w / R;
                    double acc = 0.0;
                    for (std::size_t z = 0; z < h; ++z) acc += a[z] * map[z * w + x];
                    const double noise = task.noise * rng.range(-1.0, 1.0);
                    input[(c * T + t) * R + r] = static_cast<float>(std::tanh(task.gain * acc) + noise);
                }
            }
        }
    }
    return d;
}

}  // namespace einv
