#include "kiln/raster.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "kiln/error.hpp"

namespace kiln::raster {

RasterGrid::RasterGrid(std::size_t width, std::size_t height, std::size_t bands, double fill,
                       std::optional<double> nodata, geo::GeoTransform transform)
    : width(width), height(height), bands(bands), data(width * height * bands, fill),
      nodata(nodata), transform(transform) {}

void RasterGrid::validate() const {
  if (width == 0 || height == 0 || bands == 0) {
    throw Error(ErrorCode::InvalidArgument, "grid dimensions must be positive");
  }
  if (data.size() != width * height * bands) {
    throw Error(ErrorCode::InvalidArgument, "grid data length does not match dimensions");
  }
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

bool BinaryMask::subset_of(const BinaryMask &other) const {
  if (width != other.width || height != other.height) return false;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] && !other.bits[i]) return false;
  }
  return true;
}

namespace {

class Writer {
public:
  explicit Writer(std::vector<std::uint8_t> &out) : out_(out) {}

  template <typename T> void put(T value) {
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    out_.insert(out_.end(), buf, buf + sizeof(T));
  }

private:
  std::vector<std::uint8_t> &out_;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T> T get() {
    if (pos_ + sizeof(T) > in_.size()) {
      throw Error(ErrorCode::TruncatedFile, "unexpected end of KGRD data at byte " +
                                                std::to_string(pos_));
    }
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, in_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
  }

  std::size_t remaining() const { return in_.size() - pos_; }

private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> encode_grid(const RasterGrid &grid, SampleType type) {
  grid.validate();
  std::vector<std::uint8_t> out{'K', 'G', 'R', 'D'};
  const std::size_t sample_bytes = type == SampleType::F32 ? 4 : 8;
  out.reserve(kKgrdHeaderBytes + grid.data.size() * sample_bytes);
  Writer w(out);
  w.put<std::uint16_t>(1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.width));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.height));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(grid.bands));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(type));
  w.put<std::uint8_t>(grid.nodata ? 1 : 0);
  w.put<double>(grid.nodata.value_or(0.0));
  const auto &gt = grid.transform;
  for (double v : {gt.origin_lon, gt.pixel_width, 0.0, gt.origin_lat, 0.0, gt.pixel_height}) {
    w.put<double>(v);
  }
  for (double v : grid.data) {
    if (type == SampleType::F32) {
      w.put<float>(static_cast<float>(v));
    } else {
      w.put<double>(v);
    }
  }
  return out;
}

RasterGrid decode_grid(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::TruncatedFile, "file shorter than KGRD magic");
  if (std::memcmp(bytes.data(), "KGRD", 4) != 0) {
    throw Error(ErrorCode::BadMagic, "missing KGRD magic bytes");
  }
  if (bytes.size() < kKgrdHeaderBytes) {
    throw Error(ErrorCode::TruncatedFile, "file shorter than KGRD header");
  }
  Reader r(bytes.subspan(4));
  const auto version = r.get<std::uint16_t>();
  if (version != 1) {
    throw Error(ErrorCode::UnsupportedVersion, "KGRD version " + std::to_string(version));
  }
  RasterGrid g;
  g.width = r.get<std::uint32_t>();
  g.height = r.get<std::uint32_t>();
  g.bands = r.get<std::uint16_t>();
  const auto dtype = r.get<std::uint8_t>();
  const auto has_nodata = r.get<std::uint8_t>();
  const auto nodata = r.get<double>();
  if (has_nodata) g.nodata = nodata;
  double terms[6];
  for (double &t : terms) t = r.get<double>();
  if (terms[2] != 0.0 || terms[4] != 0.0) {
    throw Error(ErrorCode::InvalidArgument, "rotated geotransforms are not supported");
  }
  g.transform = {terms[0], terms[3], terms[1], terms[5]};
  if (dtype != 1 && dtype != 2) {
    throw Error(ErrorCode::UnsupportedVersion, "KGRD dtype code " + std::to_string(dtype));
  }
  if (g.width == 0 || g.height == 0 || g.bands == 0) {
    throw Error(ErrorCode::InvalidArgument, "KGRD dimensions must be positive");
  }
  const std::size_t n = g.width * g.height * g.bands;
  const std::size_t sample_bytes = dtype == 1 ? 4 : 8;
  if (r.remaining() < n * sample_bytes) {
    throw Error(ErrorCode::TruncatedFile, "KGRD sample data truncated");
  }
  g.data.resize(n);
  for (auto &v : g.data) v = dtype == 1 ? static_cast<double>(r.get<float>()) : r.get<double>();
  return g;
}

RasterGrid read_grid(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_grid(bytes);
}

void write_grid(const RasterGrid &grid, const std::filesystem::path &path, SampleType type) {
  const auto bytes = encode_grid(grid, type);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

} // namespace kiln::raster
