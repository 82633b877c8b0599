// Writes the two synthetic covariate layers used by data/demo.cfg.
#include <filesystem>
#include <iostream>

#include "mstpp/geo_raster.hpp"
#include "mstpp/simulate.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "data";
  std::filesystem::create_directories(dir);
  const mstpp::RasterHeader h{120, 120, 500000.0, 4100000.0, 100.0, -9999.0};
  auto cover = mstpp::smooth_random_field(h, 11, 400.0, 1000.0);
  auto rugged = mstpp::smooth_random_field(h, 22, 400.0, 1000.0);
  // A small lake of nodata cells exercises the truncation path.
  for (int r = 20; r < 26; ++r)
    for (int c = 90; c < 97; ++c) {
      cover.set(r, c, h.nodata);
      rugged.set(r, c, h.nodata);
    }
  mstpp::write_ascii_grid((dir / "cover.asc").string(), cover);
  mstpp::write_ascii_grid((dir / "rugged.asc").string(), rugged);
  std::cout << "wrote " << (dir / "cover.asc").string() << " and " << (dir / "rugged.asc").string() << '\n';
}
