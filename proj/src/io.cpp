#include "convreg/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "convreg/errors.hpp"
#include "convreg/rng.hpp"

namespace convreg {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffULL));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f64(std::string& out, double d) {
  put_u64(out, std::bit_cast<std::uint64_t>(d));
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
      v = (v << 8) | static_cast<unsigned char>(bytes_[at_ + i]);
    }
    at_ += 4;
    return v;
  }

  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }

  double f64() { return std::bit_cast<double>(u64()); }

  void raw(char* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + at_, n);
    at_ += n;
  }

  std::size_t remaining() const { return bytes_.size() - at_; }

 private:
  void need(std::size_t n) {
    if (at_ + n > bytes_.size()) {
      throw LengthMismatchError("truncated file: " + path_.string());
    }
  }

  const std::string& bytes_;
  std::filesystem::path path_;
  std::size_t at_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("write failure on " + path.string());
  }
}

// netpbm header token reader: skips whitespace and '#' comments
int pnm_int(std::istream& in, const std::filesystem::path& path) {
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      while (c != EOF && c != '\n') {
        c = in.get();
      }
    }
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c)) {
    throw FormatError("malformed header in " + path.string());
  }
  int v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = in.get();
  }
  if (c != EOF) {
    in.unget();
  }
  return v;
}

}  // namespace

Tensor read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  const bool color = (m0 == 'P' && m1 == '6');
  if (!(m0 == 'P' && (m1 == '5' || m1 == '6'))) {
    std::ostringstream msg;
    msg << "unsupported image magic '" << m0 << m1 << "' in " << path.string();
    throw FormatError(msg.str());
  }
  const int width = pnm_int(in, path);
  const int height = pnm_int(in, path);
  const int maxval = pnm_int(in, path);
  if (width < 1 || height < 1) {
    throw FormatError("bad dimensions in " + path.string());
  }
  if (maxval < 1 || maxval > 255) {
    throw FormatError("only 8-bit images supported, maxval=" +
                      std::to_string(maxval) + " in " + path.string());
  }
  in.get();  // single whitespace byte before the raster

  const int channels = color ? 3 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height *
                                 channels);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw LengthMismatchError("truncated raster in " + path.string());
  }

  Tensor t(channels, height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t px = (static_cast<std::size_t>(y) * width + x) * channels;
      for (int c = 0; c < channels; ++c) {
        t.at(c, y, x) = raw[px + c] / 255.0;
      }
    }
  }
  return t;
}

bool write_pgm(const Tensor& map, const std::filesystem::path& path) {
  if (map.channels() != 1) {
    throw ShapeError("write_pgm expects a single-channel map");
  }
  bool clamped = false;
  std::string bytes;
  bytes += "P5\n" + std::to_string(map.width()) + " " +
           std::to_string(map.height()) + "\n255\n";
  bytes.reserve(bytes.size() + map.size());
  for (double v : map.data()) {
    if (v < 0.0 || v > 1.0) {
      clamped = true;
      v = std::clamp(v, 0.0, 1.0);
    }
    bytes.push_back(
        static_cast<char>(static_cast<int>(std::floor(255.0 * v + 0.5))));
  }
  spit(path, bytes);
  return clamped;
}

void write_raw_map(const Tensor& map, const std::filesystem::path& path) {
  if (map.channels() != 1) {
    throw ShapeError("write_raw_map expects a single-channel map");
  }
  std::string bytes;
  put_u32(bytes, static_cast<std::uint32_t>(map.height()));
  put_u32(bytes, static_cast<std::uint32_t>(map.width()));
  for (double v : map.data()) {
    put_f64(bytes, v);
  }
  spit(path, bytes);
}

Tensor read_raw_map(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  ByteReader r(bytes, path);
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  if (h < 1 || w < 1) {
    throw FormatError("bad raw-map dimensions in " + path.string());
  }
  Tensor t(1, static_cast<int>(h), static_cast<int>(w));
  for (double& v : t.data()) {
    v = r.f64();
  }
  return t;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  const NetworkSpec& spec = net.spec();
  std::string bytes = "HCNR";
  put_u32(bytes, 1);  // version
  put_u32(bytes, static_cast<std::uint32_t>(spec.input_channels));
  put_u32(bytes, static_cast<std::uint32_t>(spec.target_factor));
  put_u32(bytes, spec.combiner == CombinerMode::kLinear ? 0u : 1u);
  put_u32(bytes, static_cast<std::uint32_t>(spec.blocks.size()));
  for (const BlockSpec& b : spec.blocks) {
    put_u32(bytes, static_cast<std::uint32_t>(b.num_filters));
    put_u32(bytes, static_cast<std::uint32_t>(b.filter_size));
    put_u32(bytes, b.pool ? 1u : 0u);
    put_u32(bytes, b.lrn ? 1u : 0u);
    put_u32(bytes, b.upsample ? 1u : 0u);
  }
  put_u64(bytes, net.init_seed());
  const std::vector<double> params = net.flatten_params();
  put_u64(bytes, params.size());
  for (double p : params) {
    put_f64(bytes, p);
  }
  spit(path, bytes);
}

Network load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  ByteReader r(bytes, path);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, "HCNR", 4) != 0) {
    throw BadMagicError("not a checkpoint: " + path.string());
  }
  const std::uint32_t version = r.u32();
  if (version != 1) {
    throw BadVersionError("unsupported checkpoint version " +
                          std::to_string(version));
  }
  NetworkSpec spec;
  spec.input_channels = static_cast<int>(r.u32());
  spec.target_factor = static_cast<int>(r.u32());
  spec.combiner =
      r.u32() == 0 ? CombinerMode::kLinear : CombinerMode::kChannelMax;
  const std::uint32_t n_blocks = r.u32();
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    BlockSpec b;
    b.num_filters = static_cast<int>(r.u32());
    b.filter_size = static_cast<int>(r.u32());
    b.pool = r.u32() != 0;
    b.lrn = r.u32() != 0;
    b.upsample = r.u32() != 0;
    spec.blocks.push_back(b);
  }
  const std::uint64_t seed = r.u64();
  const std::uint64_t count = r.u64();

  Network net(spec, seed);
  if (count != net.num_params()) {
    throw LengthMismatchError(
        "checkpoint declares " + std::to_string(count) + " parameters, spec implies " +
        std::to_string(net.num_params()));
  }
  std::vector<double> params(count);
  for (double& p : params) {
    p = r.f64();
  }
  net.unflatten_params(params);
  return net;
}

namespace {

RecordKind parse_kind(const std::string& s, const std::filesystem::path& path) {
  if (s == "windows") {
    return RecordKind::kWindows;
  }
  if (s == "map") {
    return RecordKind::kMap;
  }
  if (s == "fixations") {
    return RecordKind::kFixations;
  }
  throw FormatError("unknown record kind '" + s + "' in " + path.string());
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t at = 0;
  while (true) {
    const std::size_t next = s.find(sep, at);
    if (next == std::string::npos) {
      out.push_back(s.substr(at));
      return out;
    }
    out.push_back(s.substr(at, next - at));
    at = next + 1;
  }
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open manifest " + path.string());
  }
  const std::filesystem::path base = path.parent_path();
  Manifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') {
      continue;
    }
    const std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 3) {
      throw FormatError("manifest line " + std::to_string(line_no) +
                        ": expected 3 tab-separated fields");
    }
    ManifestRecord rec;
    rec.image_path = fields[0];
    if (rec.image_path.is_relative()) {
      rec.image_path = base / rec.image_path;
    }
    if (!std::filesystem::exists(rec.image_path)) {
      throw InputError("manifest references missing image " +
                       rec.image_path.string());
    }
    rec.kind = parse_kind(fields[1], path);
    const std::string& payload = fields[2];
    switch (rec.kind) {
      case RecordKind::kWindows: {
        if (!payload.empty()) {
          for (const std::string& item : split(payload, ';')) {
            const std::vector<std::string> parts = split(item, ',');
            if (parts.size() != 4) {
              throw FormatError("manifest line " + std::to_string(line_no) +
                                ": window needs cx,cy,w,h");
            }
            rec.windows.push_back({std::stod(parts[0]), std::stod(parts[1]),
                                   std::stod(parts[2]), std::stod(parts[3])});
          }
        }
        break;
      }
      case RecordKind::kMap: {
        rec.map_path = payload;
        if (rec.map_path.is_relative()) {
          rec.map_path = base / rec.map_path;
        }
        if (!std::filesystem::exists(rec.map_path)) {
          throw InputError("manifest references missing map " +
                           rec.map_path.string());
        }
        break;
      }
      case RecordKind::kFixations: {
        for (const std::string& item : split(payload, ';')) {
          const std::vector<std::string> parts = split(item, ',');
          if (parts.size() != 2) {
            throw FormatError("manifest line " + std::to_string(line_no) +
                              ": fixation needs x,y");
          }
          rec.fixations.emplace_back(std::stoi(parts[0]), std::stoi(parts[1]));
        }
        break;
      }
    }
    m.records.push_back(std::move(rec));
  }
  if (m.records.empty()) {
    throw FormatError("manifest " + path.string() + " has no records");
  }
  return m;
}

namespace {

bool rects_overlap(const Window& a, const Window& b) {
  return std::abs(a.cx - b.cx) * 2.0 < a.w + b.w &&
         std::abs(a.cy - b.cy) * 2.0 < a.h + b.h;
}

}  // namespace

std::filesystem::path synth_dataset(const SynthConfig& cfg,
                                    const std::filesystem::path& out_dir) {
  if (cfg.canvas < 1 || cfg.factor < 1 || cfg.canvas % cfg.factor != 0) {
    throw InputError("canvas must be divisible by factor");
  }
  if (cfg.min_windows < 0 || cfg.max_windows < cfg.min_windows) {
    throw InputError("bad windows-per-image range");
  }
  std::filesystem::create_directories(out_dir);
  Rng rng(cfg.seed);
  std::ostringstream manifest;

  for (int i = 0; i < cfg.count; ++i) {
    Tensor img(1, cfg.canvas, cfg.canvas);
    for (double& v : img.data()) {
      v = rng.uniform(0.05, 0.35);
    }

    const int want =
        cfg.min_windows +
        static_cast<int>(rng.below(
            static_cast<std::uint64_t>(cfg.max_windows - cfg.min_windows) + 1));
    std::vector<Window> windows;
    for (int k = 0; k < want; ++k) {
      for (int attempt = 0; attempt < 50; ++attempt) {
        Window win;
        win.w = rng.uniform(cfg.min_extent_frac, cfg.max_extent_frac) *
                cfg.canvas;
        win.h = rng.uniform(cfg.min_extent_frac, cfg.max_extent_frac) *
                cfg.canvas;
        win.cx = rng.uniform(win.w / 2.0, cfg.canvas - win.w / 2.0);
        win.cy = rng.uniform(win.h / 2.0, cfg.canvas - win.h / 2.0);
        bool overlaps = false;
        for (const Window& other : windows) {
          if (rects_overlap(win, other)) {
            overlaps = true;
            break;
          }
        }
        if (!overlaps) {
          windows.push_back(win);
          break;
        }
      }
    }

    for (const Window& win : windows) {
      const double brightness = rng.uniform(0.75, 0.95);
      const double ax = win.w / 2.0;
      const double ay = win.h / 2.0;
      const int y0 = std::max(0, static_cast<int>(std::floor(win.cy - ay)));
      const int y1 =
          std::min(cfg.canvas - 1, static_cast<int>(std::ceil(win.cy + ay)));
      const int x0 = std::max(0, static_cast<int>(std::floor(win.cx - ax)));
      const int x1 =
          std::min(cfg.canvas - 1, static_cast<int>(std::ceil(win.cx + ax)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double rx = (x - win.cx) / ax;
          const double ry = (y - win.cy) / ay;
          const double r2 = rx * rx + ry * ry;
          if (r2 <= 1.0) {
            // mild radial falloff keeps the center brightest
            const double v = brightness * (1.0 - 0.3 * r2);
            img.at(0, y, x) = std::max(img.at(0, y, x), v);
          }
        }
      }
    }

    char name[32];
    std::snprintf(name, sizeof(name), "img_%04d.pgm", i);
    write_pgm(img, out_dir / name);

    manifest << name << '\t' << "windows" << '\t';
    for (std::size_t k = 0; k < windows.size(); ++k) {
      if (k > 0) {
        manifest << ';';
      }
      char wbuf[96];
      std::snprintf(wbuf, sizeof(wbuf), "%.3f,%.3f,%.3f,%.3f", windows[k].cx,
                    windows[k].cy, windows[k].w, windows[k].h);
      manifest << wbuf;
    }
    manifest << '\n';
  }

  const std::filesystem::path manifest_path = out_dir / "manifest.tsv";
  spit(manifest_path, manifest.str());
  return manifest_path;
}

NetworkSpec load_network_spec(const std::filesystem::path& path,
                              int input_channels) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open network spec " + path.string());
  }
  NetworkSpec spec;
  spec.input_channels = input_channels;
  bool have_combiner = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) {
      tokens.push_back(tok);
    }
    if (tokens.empty()) {
      continue;
    }
    if (have_combiner) {
      throw FormatError("network spec line " + std::to_string(line_no) +
                        ": content after the combiner line");
    }
    if (tokens.size() == 1 &&
        (tokens[0] == "linear" || tokens[0] == "channel_max")) {
      spec.combiner = tokens[0] == "linear" ? CombinerMode::kLinear
                                            : CombinerMode::kChannelMax;
      have_combiner = true;
      continue;
    }
    if (tokens.size() < 2) {
      throw FormatError("network spec line " + std::to_string(line_no) +
                        ": expected '<filters> <size> [pool] [lrn] [upsample]'");
    }
    BlockSpec b;
    try {
      b.num_filters = std::stoi(tokens[0]);
      b.filter_size = std::stoi(tokens[1]);
    } catch (const std::exception&) {
      throw FormatError("network spec line " + std::to_string(line_no) +
                        ": bad filter count or size");
    }
    for (std::size_t i = 2; i < tokens.size(); ++i) {
      if (tokens[i] == "pool") {
        b.pool = true;
      } else if (tokens[i] == "lrn") {
        b.lrn = true;
      } else if (tokens[i] == "upsample") {
        b.upsample = true;
      } else {
        throw FormatError("network spec line " + std::to_string(line_no) +
                          ": unknown flag '" + tokens[i] + "'");
      }
    }
    spec.blocks.push_back(b);
  }
  if (!have_combiner) {
    throw FormatError("network spec " + path.string() +
                      " is missing the final combiner line");
  }
  spec.target_factor = computed_factor(spec);
  return spec;
}

}  // namespace convreg
