#include <algorithm>
#include <map>

#include "kiln/error.hpp"
#include "kiln/rs/pipeline.hpp"

namespace kiln::rs {

namespace fs = std::filesystem;

std::vector<TileFrames> load_tile_directory(const fs::path &dir, const raster::TileOptions &png) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, dir.string() + " is not a directory");
  std::vector<fs::path> frames;
  for (const auto &entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) frames.push_back(entry.path());
  }
  std::sort(frames.begin(), frames.end());

  // stem -> one file per frame (empty path when the frame lacks it)
  std::map<std::string, std::vector<fs::path>> by_stem;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (const auto &entry : fs::directory_iterator(frames[f])) {
      const auto ext = entry.path().extension();
      if (!entry.is_regular_file() || (ext != ".kgrd" && ext != ".png")) continue;
      auto &slots = by_stem[entry.path().stem().string()];
      slots.resize(frames.size());
      slots[f] = entry.path();
    }
  }
  if (by_stem.empty()) throw Error(ErrorCode::InvalidArgument, "no tiles found in " + dir.string());

  std::vector<TileFrames> tiles;
  for (auto &[stem, files] : by_stem) {
    TileFrames tile;
    tile.name = stem;
    files.resize(frames.size());
    try {
      for (std::size_t f = 0; f < files.size(); ++f) {
        if (files[f].empty()) {
          throw Error(ErrorCode::Io, "missing from " + frames[f].filename().string());
        }
        if (files[f].extension() == ".kgrd") {
          tile.frames.push_back(raster::read_grid(files[f]));
        } else {
          auto sidecar = files[f];
          sidecar.replace_extension(".json");
          tile.frames.push_back(raster::read_rgb_tile(files[f], sidecar, png));
        }
      }
    } catch (const std::exception &e) {
      tile.frames.clear();
      tile.load_error = e.what();
    }
    tiles.push_back(std::move(tile));
  }
  return tiles;
}

} // namespace kiln::rs
