#pragma once

#include <filesystem>

#include "defsurf/geometry/mesh.hpp"

namespace defsurf::geom {

// Wavefront OBJ (ASCII `v`/`f` records, 1-based indices; quads as 4-index
// faces). Round-trips vertex coordinates to 1e-6 and face indices exactly.
void export_obj(const Mesh& mesh, const std::filesystem::path& path);
Mesh import_obj(const std::filesystem::path& path);

}  // namespace defsurf::geom
