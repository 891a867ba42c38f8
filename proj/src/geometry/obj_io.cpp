#include "defsurf/geometry/obj_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace defsurf::geom {

void export_obj(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("export_obj: cannot open " + path.string());
  out << "# defsurf mesh: " << mesh.vertex_count() << " vertices, "
      << mesh.face_count() << " faces\n";
  char line[128];
  for (const Vec3& v : mesh.vertices()) {
    std::snprintf(line, sizeof(line), "v %.10g %.10g %.10g\n",
                  static_cast<double>(v.x()), static_cast<double>(v.y()),
                  static_cast<double>(v.z()));
    out << line;
  }
  for (const Face& f : mesh.faces()) {
    out << 'f';
    for (int i = 0; i < f.size; ++i) out << ' ' << (f[i] + 1);
    out << '\n';
  }
  if (!out) throw IoError("export_obj: write failed for " + path.string());
}

Mesh import_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("import_obj: cannot open " + path.string());

  std::vector<Vec3> verts;
  std::vector<Face> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z))
        throw ParseError("import_obj: malformed vertex record", line_no);
      verts.emplace_back(static_cast<Real>(x), static_cast<Real>(y),
                         static_cast<Real>(z));
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string token;
      while (ss >> token) {
        // Accept `i`, `i/t`, `i/t/n`, `i//n`; only the vertex index is used.
        const std::size_t slash = token.find('/');
        const std::string head =
            slash == std::string::npos ? token : token.substr(0, slash);
        int value = 0;
        try {
          value = std::stoi(head);
        } catch (const std::exception&) {
          throw ParseError("import_obj: malformed face index '" + token + "'",
                           line_no);
        }
        if (value < 1 || value > static_cast<int>(verts.size()))
          throw ParseError("import_obj: face index " + std::to_string(value) +
                               " out of range",
                           line_no);
        idx.push_back(value - 1);
      }
      if (idx.size() == 3)
        faces.push_back(Face::tri(idx[0], idx[1], idx[2]));
      else if (idx.size() == 4)
        faces.push_back(Face::quad(idx[0], idx[1], idx[2], idx[3]));
      else
        throw ParseError("import_obj: face with " +
                             std::to_string(idx.size()) +
                             " indices (only 3 or 4 supported)",
                         line_no);
    }
    // Other records (vn, vt, comments, groups) are ignored.
  }
  try {
    return Mesh(std::move(verts), std::move(faces));
  } catch (const Error& e) {
    throw ParseError(std::string("import_obj: ") + e.what(), line_no);
  }
}

}  // namespace defsurf::geom
