#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>

#include "defsurf/encode/encoding.hpp"
#include "defsurf/fields/deformation.hpp"
#include "defsurf/geometry/chamfer.hpp"
#include "defsurf/geometry/obj_io.hpp"
#include "defsurf/geometry/primitives.hpp"
#include "defsurf/geometry/quality.hpp"
#include "defsurf/pipeline.hpp"
#include "defsurf/spectral/eigenbasis.hpp"
#include "defsurf/spectral/laplacian.hpp"

namespace py = pybind11;
using namespace defsurf;

namespace {

using Faces = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

// Meshes cross the boundary as (V, F) arrays; quads use 4 columns, mixed
// meshes pad triangles with -1.
Faces faces_to_matrix(const geom::Mesh& mesh) {
  int cols = 3;
  for (const auto& f : mesh.faces())
    if (f.size == 4) cols = 4;
  Faces out(mesh.face_count(), cols);
  out.setConstant(-1);
  for (Index i = 0; i < mesh.face_count(); ++i) {
    const geom::Face& f = mesh.faces()[static_cast<std::size_t>(i)];
    for (int k = 0; k < f.size; ++k) out(i, k) = f[k];
  }
  return out;
}

geom::Mesh matrix_to_mesh(const Mat& vertices, const Faces& faces) {
  if (vertices.cols() != 3)
    throw ArgumentError("mesh: vertices must be N x 3");
  std::vector<Vec3> verts(static_cast<std::size_t>(vertices.rows()));
  for (Index i = 0; i < vertices.rows(); ++i)
    verts[static_cast<std::size_t>(i)] = vertices.row(i).transpose();
  std::vector<geom::Face> face_list;
  face_list.reserve(static_cast<std::size_t>(faces.rows()));
  for (Index i = 0; i < faces.rows(); ++i) {
    if (faces.cols() == 3 || faces(i, 3) < 0)
      face_list.push_back(geom::Face::tri(faces(i, 0), faces(i, 1), faces(i, 2)));
    else
      face_list.push_back(geom::Face::quad(faces(i, 0), faces(i, 1),
                                           faces(i, 2), faces(i, 3)));
  }
  return geom::Mesh(std::move(verts), std::move(face_list));
}

py::tuple mesh_to_tuple(const geom::Mesh& mesh) {
  return py::make_tuple(mesh.vertex_matrix(), faces_to_matrix(mesh));
}

py::dict json_to_dict(const nlohmann::json& j) {
  py::object loads = py::module_::import("json").attr("loads");
  return loads(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "deformation-field surface reconstruction core";

  py::register_exception<Error>(m, "DefsurfError");

  // geometry
  m.def(
      "icosphere",
      [](int level) { return mesh_to_tuple(geom::icosphere(level)); },
      py::arg("level"), "icosahedral sphere mesh: (vertices, faces)");
  m.def(
      "quad_sphere",
      [](int n) { return mesh_to_tuple(geom::quad_sphere(n)); },
      py::arg("n"), "cubed-sphere quad mesh: (vertices, faces)");
  m.def(
      "subdivide",
      [](const Mat& v, const Faces& f, bool project) {
        return mesh_to_tuple(geom::subdivide(matrix_to_mesh(v, f), project));
      },
      py::arg("vertices"), py::arg("faces"), py::arg("project_to_sphere") = true);
  m.def(
      "face_normals",
      [](const Mat& v, const Faces& f) {
        const auto normals = geom::face_normals(matrix_to_mesh(v, f));
        Mat out(static_cast<Index>(normals.size()), 3);
        for (std::size_t i = 0; i < normals.size(); ++i)
          out.row(static_cast<Index>(i)) = normals[i].transpose();
        return out;
      },
      py::arg("vertices"), py::arg("faces"));
  m.def(
      "vertex_normals",
      [](const Mat& v, const Faces& f) {
        const auto normals = geom::vertex_normals(matrix_to_mesh(v, f));
        Mat out(static_cast<Index>(normals.size()), 3);
        for (std::size_t i = 0; i < normals.size(); ++i)
          out.row(static_cast<Index>(i)) = normals[i].transpose();
        return out;
      },
      py::arg("vertices"), py::arg("faces"));
  m.def(
      "euler_characteristic",
      [](const Mat& v, const Faces& f) {
        return matrix_to_mesh(v, f).euler_characteristic();
      },
      py::arg("vertices"), py::arg("faces"));
  m.def(
      "triangle_icr",
      [](const Vec3& p0, const Vec3& p1, const Vec3& p2) {
        const geom::TriangleQuality q = geom::triangle_icr(p0, p1, p2);
        return py::make_tuple(q.inradius, q.circumradius, q.normalized_icr);
      },
      py::arg("p0"), py::arg("p1"), py::arg("p2"),
      "(inradius, circumradius, normalized_icr)");
  m.def("chamfer_l1", &geom::chamfer_l1, py::arg("points_p"),
        py::arg("points_q"));
  m.def(
      "export_obj",
      [](const Mat& v, const Faces& f, const std::filesystem::path& path) {
        geom::export_obj(matrix_to_mesh(v, f), path);
      },
      py::arg("vertices"), py::arg("faces"), py::arg("path"));
  m.def(
      "import_obj",
      [](const std::filesystem::path& path) {
        return mesh_to_tuple(geom::import_obj(path));
      },
      py::arg("path"));

  // spectral
  m.def(
      "cotan_laplacian",
      [](const Mat& v, const Faces& f) {
        const auto pair = spectral::cotan_laplacian(matrix_to_mesh(v, f));
        Mat dense = Mat(pair.stiffness);
        return py::make_tuple(dense, pair.mass);
      },
      py::arg("vertices"), py::arg("faces"),
      "(stiffness W as dense array, mass diagonal)");
  m.def(
      "eigenbasis",
      [](const Mat& v, const Faces& f, long d) {
        const geom::Mesh mesh = matrix_to_mesh(v, f);
        const auto basis = spectral::eigenbasis(
            spectral::cotan_laplacian(mesh), d, mesh.content_hash());
        return py::make_tuple(basis.eigenvalues, basis.eigenfunctions);
      },
      py::arg("vertices"), py::arg("faces"), py::arg("d"),
      "(eigenvalues, eigenfunctions) of W phi = lambda A phi");

  // encode
  m.def(
      "rff_encode",
      [](const Mat& points, long width, double sigma, std::uint64_t seed) {
        return encode::rff_encode(
            points, encode::RffMatrix::sample(width, static_cast<Real>(sigma),
                                              seed));
      },
      py::arg("points"), py::arg("width"), py::arg("sigma"), py::arg("seed"));
  m.def("octave_encode", &encode::octave_encode, py::arg("vectors"),
        py::arg("octaves"));

  // fields
  m.def(
      "delta_schedule",
      [](long iteration, long fine_start, long ramp_iters, double max_delta) {
        fields::DeltaSchedule schedule{fine_start, ramp_iters,
                                       static_cast<Real>(max_delta)};
        return static_cast<double>(schedule.at(iteration));
      },
      py::arg("iteration"), py::arg("fine_start"), py::arg("ramp_iters") = 100,
      py::arg("max_delta") = 0.1);

  // pipeline
  m.def(
      "gen_scene",
      [](const std::string& shape, int views, int resolution,
         const std::filesystem::path& out_dir, double albedo_frequency,
         std::uint64_t seed, double bump_amplitude, int bump_frequency,
         const std::vector<double>& radii) {
        pipeline::GenSceneArgs args;
        args.shape = scenes::TargetShape::from_name(shape);
        if (radii.size() == 3)
          args.shape.radii = Vec3(static_cast<Real>(radii[0]),
                                  static_cast<Real>(radii[1]),
                                  static_cast<Real>(radii[2]));
        args.shape.bump_amplitude = static_cast<Real>(bump_amplitude);
        args.shape.bump_frequency = bump_frequency;
        args.views = views;
        args.resolution = resolution;
        args.albedo_frequency = static_cast<Real>(albedo_frequency);
        args.seed = seed;
        args.out_dir = out_dir;
        return json_to_dict(pipeline::gen_scene(args));
      },
      py::arg("shape"), py::arg("views"), py::arg("resolution"),
      py::arg("out_dir"), py::arg("albedo_frequency") = 3.0,
      py::arg("seed") = 7, py::arg("bump_amplitude") = 0.08,
      py::arg("bump_frequency") = 6,
      py::arg("radii") = std::vector<double>{0.9, 0.6, 0.6});
  m.def(
      "train",
      [](const std::filesystem::path& dataset_dir,
         const std::filesystem::path& out_dir, const std::string& config_json,
         const std::string& ablate) {
        pipeline::TrainArgs args;
        args.dataset_dir = dataset_dir;
        args.out_dir = out_dir;
        args.ablation_preset = ablate;
        if (!config_json.empty()) {
          const auto tmp = out_dir / "config_override.json";
          std::filesystem::create_directories(out_dir);
          std::ofstream(tmp) << config_json;
          args.config_path = tmp;
        }
        return json_to_dict(pipeline::run_train(args));
      },
      py::arg("dataset_dir"), py::arg("out_dir"), py::arg("config_json") = "",
      py::arg("ablate") = "");
  m.def(
      "extract",
      [](const std::filesystem::path& checkpoint,
         const std::filesystem::path& out_obj, int tri_level, int quad_n,
         const std::filesystem::path& cache_dir) {
        pipeline::ExtractArgs args;
        args.checkpoint = checkpoint;
        args.out_obj = out_obj;
        args.tri_level = tri_level;
        args.quad_n = quad_n;
        args.cache_dir = cache_dir;
        return json_to_dict(pipeline::run_extract(args));
      },
      py::arg("checkpoint"), py::arg("out_obj"), py::arg("tri_level") = -1,
      py::arg("quad_n") = -1, py::arg("cache_dir") = std::filesystem::path());
  m.def(
      "evaluate",
      [](const std::filesystem::path& checkpoint,
         const std::filesystem::path& dataset_dir, int tri_level,
         const std::filesystem::path& cache_dir) {
        pipeline::EvalArgs args;
        args.checkpoint = checkpoint;
        args.dataset_dir = dataset_dir;
        args.tri_level = tri_level;
        args.cache_dir = cache_dir;
        return json_to_dict(pipeline::run_eval(args));
      },
      py::arg("checkpoint"), py::arg("dataset_dir"), py::arg("tri_level") = 5,
      py::arg("cache_dir") = std::filesystem::path());
  m.def(
      "render",
      [](const std::filesystem::path& checkpoint,
         const std::filesystem::path& out_png,
         const std::filesystem::path& dataset_dir, int view,
         const std::filesystem::path& cache_dir) {
        pipeline::RenderArgs args;
        args.checkpoint = checkpoint;
        args.out_png = out_png;
        args.dataset_dir = dataset_dir;
        args.view = view;
        args.cache_dir = cache_dir;
        return json_to_dict(pipeline::run_render(args));
      },
      py::arg("checkpoint"), py::arg("out_png"),
      py::arg("dataset_dir") = std::filesystem::path(), py::arg("view") = -1,
      py::arg("cache_dir") = std::filesystem::path());
}
