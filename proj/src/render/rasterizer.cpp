#include "defsurf/render/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace defsurf::render {

namespace {

struct ProjectedVertices {
  Mat uv;       // N x 2
  Vec depth;    // N
  Mat cam;      // N x 3 camera-space coordinates
  std::vector<std::uint8_t> valid;
};

ProjectedVertices project_vertices(const Mat& positions, const Camera& cam) {
  const Index n = positions.rows();
  ProjectedVertices out;
  out.uv.resize(n, 2);
  out.depth.resize(n);
  out.cam.resize(n, 3);
  out.valid.assign(static_cast<std::size_t>(n), 0);
  const Mat3 r = cam.rotation;
  const Vec3 t = cam.translation;
  const Real fx = cam.intrinsics(0, 0), fy = cam.intrinsics(1, 1);
  const Real skew = cam.intrinsics(0, 1);
  const Real cx = cam.intrinsics(0, 2), cy = cam.intrinsics(1, 2);
  for (Index i = 0; i < n; ++i) {
    const Vec3 p = r * positions.row(i).transpose() + t;
    out.cam.row(i) = p.transpose();
    out.depth[i] = p.z();
    if (p.z() > Camera::kMinDepth) {
      out.valid[static_cast<std::size_t>(i)] = 1;
      out.uv(i, 0) = fx * p.x() / p.z() + skew * p.y() / p.z() + cx;
      out.uv(i, 1) = fy * p.y() / p.z() + cy;
    } else {
      out.uv.row(i).setZero();
    }
  }
  return out;
}

inline Real cross2(const Vec2& a, const Vec2& b) {
  return a.x() * b.y() - a.y() * b.x();
}

inline Vec2 perp(const Vec2& v) { return Vec2(v.y(), -v.x()); }

}  // namespace

ImageBuffer RasterCoverage::hard_mask() const {
  ImageBuffer img(width, height, 1);
  for (int pix : covered) img.data[static_cast<std::size_t>(pix)] = 1.0f;
  return img;
}

RasterCoverage rasterize_coverage(const Mat& positions, const geom::Mesh& mesh,
                                  const Camera& camera) {
  if (positions.rows() != mesh.vertex_count())
    throw ArgumentError("rasterize_coverage: position/vertex count mismatch");
  RasterCoverage cov;
  cov.width = camera.width;
  cov.height = camera.height;
  cov.face_id.assign(static_cast<std::size_t>(camera.width) * camera.height, -1);
  std::vector<Real> zbuf(cov.face_id.size(),
                         std::numeric_limits<Real>::infinity());

  const ProjectedVertices proj = project_vertices(positions, camera);
  const auto& faces = mesh.faces();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const geom::Face& face = faces[f];
    if (face.size != 3)
      throw ArgumentError("rasterize_coverage: mesh must be triangular");
    const int i0 = face[0], i1 = face[1], i2 = face[2];
    if (!proj.valid[i0] || !proj.valid[i1] || !proj.valid[i2]) {
      ++cov.clipped_faces;
      continue;
    }
    const Vec2 a = proj.uv.row(i0).transpose();
    const Vec2 b = proj.uv.row(i1).transpose();
    const Vec2 c = proj.uv.row(i2).transpose();
    const Real area = cross2(b - a, c - a);
    if (area == Real(0)) continue;

    const int x0 = std::max(0, static_cast<int>(std::floor(
                                   std::min({a.x(), b.x(), c.x()}) - Real(0.5))));
    const int x1 = std::min(camera.width - 1,
                            static_cast<int>(std::ceil(
                                std::max({a.x(), b.x(), c.x()}) - Real(0.5))));
    const int y0 = std::max(0, static_cast<int>(std::floor(
                                   std::min({a.y(), b.y(), c.y()}) - Real(0.5))));
    const int y1 = std::min(camera.height - 1,
                            static_cast<int>(std::ceil(
                                std::max({a.y(), b.y(), c.y()}) - Real(0.5))));
    const Real inv_area = Real(1) / area;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const Vec2 p(static_cast<Real>(x) + Real(0.5),
                     static_cast<Real>(y) + Real(0.5));
        const Real w0 = cross2(b - p, c - p) * inv_area;
        const Real w1 = cross2(c - p, a - p) * inv_area;
        const Real w2 = Real(1) - w0 - w1;
        if (w0 < Real(0) || w1 < Real(0) || w2 < Real(0)) continue;
        const Real s = w0 / proj.depth[i0] + w1 / proj.depth[i1] +
                       w2 / proj.depth[i2];
        if (!(s > Real(0))) continue;
        const Real z = Real(1) / s;  // perspective-correct depth
        const std::size_t pix = static_cast<std::size_t>(y) * camera.width + x;
        if (z < zbuf[pix]) {
          zbuf[pix] = z;
          cov.face_id[pix] = static_cast<int>(f);
        }
      }
  }
  for (std::size_t pix = 0; pix < cov.face_id.size(); ++pix)
    if (cov.face_id[pix] >= 0) cov.covered.push_back(static_cast<int>(pix));
  return cov;
}

ad::Tensor face_normal_tensor(const ad::Tensor& positions,
                              const geom::Mesh& mesh) {
  std::vector<int> i0, i1, i2;
  i0.reserve(static_cast<std::size_t>(mesh.face_count()));
  i1.reserve(i0.capacity());
  i2.reserve(i0.capacity());
  for (const geom::Face& f : mesh.faces()) {
    i0.push_back(f[0]);
    i1.push_back(f[1]);
    i2.push_back(f[2]);
  }
  const ad::Tensor p0 = ad::gather_rows(positions, i0);
  const ad::Tensor p1 = ad::gather_rows(positions, i1);
  const ad::Tensor p2 = ad::gather_rows(positions, i2);
  const ad::Tensor n = ad::cross(ad::sub(p1, p0), ad::sub(p2, p0));
  return ad::normalize_rows(n);
}

ad::Tensor vertex_normal_tensor(const ad::Tensor& positions,
                                const geom::Mesh& mesh) {
  std::vector<int> i0, i1, i2, scatter;
  for (const geom::Face& f : mesh.faces()) {
    i0.push_back(f[0]);
    i1.push_back(f[1]);
    i2.push_back(f[2]);
  }
  const ad::Tensor p0 = ad::gather_rows(positions, i0);
  const ad::Tensor p1 = ad::gather_rows(positions, i1);
  const ad::Tensor p2 = ad::gather_rows(positions, i2);
  // |cross| = 2 * area, so the plain sum is area weighting.
  const ad::Tensor fn = ad::cross(ad::sub(p1, p0), ad::sub(p2, p0));
  const ad::Tensor stacked = ad::concat_rows({fn, fn, fn});
  scatter = i0;
  scatter.insert(scatter.end(), i1.begin(), i1.end());
  scatter.insert(scatter.end(), i2.begin(), i2.end());
  const ad::Tensor accum =
      ad::scatter_add_rows(stacked, scatter, positions.rows());
  return ad::normalize_rows(accum);
}

namespace {

// Everything the interpolation backward needs, shared by the three output
// nodes of `rasterize`.
struct InterpContext {
  std::vector<std::array<int, 3>> corners;  // per covered pixel
  Mat bary;                                 // M x 3
  // d(beta_k) / d(u_j, v_j, z_j), layout [k*9 + j*3 + comp].
  std::vector<std::array<Real, 27>> dbary;
  Mat cam_coords;  // N x 3 camera-space vertex coordinates
  Mat3 rotation;
  Real fx = 0, fy = 0, skew = 0;
};

// Pull a per-pixel-per-corner scalar gradient q back to vertex positions
// through the barycentric weights and the projection.
void accumulate_bary_path(const InterpContext& ctx, const Mat& q,
                          ad::Node* positions) {
  Mat& grad = positions->grad;
  if (grad.size() == 0)
    grad = Mat::Zero(positions->value.rows(), positions->value.cols());
  const Index m = ctx.bary.rows();
  for (Index pix = 0; pix < m; ++pix) {
    const auto& corner = ctx.corners[static_cast<std::size_t>(pix)];
    const auto& d = ctx.dbary[static_cast<std::size_t>(pix)];
    for (int j = 0; j < 3; ++j) {
      Real du = 0, dv = 0, dz = 0;
      for (int k = 0; k < 3; ++k) {
        const Real qk = q(pix, k);
        if (qk == Real(0)) continue;
        du += qk * d[static_cast<std::size_t>(k * 9 + j * 3 + 0)];
        dv += qk * d[static_cast<std::size_t>(k * 9 + j * 3 + 1)];
        dz += qk * d[static_cast<std::size_t>(k * 9 + j * 3 + 2)];
      }
      if (du == Real(0) && dv == Real(0) && dz == Real(0)) continue;
      const int vid = corner[static_cast<std::size_t>(j)];
      const Real X = ctx.cam_coords(vid, 0);
      const Real Y = ctx.cam_coords(vid, 1);
      const Real Z = ctx.cam_coords(vid, 2);
      const Real inv_z = Real(1) / Z;
      // d(u,v,z)/d(cam) rows pulled back by the gradient components.
      Vec3 dcam;
      dcam.x() = du * ctx.fx * inv_z;
      dcam.y() = du * ctx.skew * inv_z + dv * ctx.fy * inv_z;
      dcam.z() = -du * (ctx.fx * X + ctx.skew * Y) * inv_z * inv_z -
                 dv * ctx.fy * Y * inv_z * inv_z + dz;
      grad.row(vid) += (ctx.rotation.transpose() * dcam).transpose();
    }
  }
}

// Attribute-path gradient: beta-weighted scatter of the pixel gradient onto
// the face corners.
void accumulate_attribute_path(const InterpContext& ctx, const Mat& pixel_grad,
                               ad::Node* attribute) {
  Mat& grad = attribute->grad;
  if (grad.size() == 0)
    grad = Mat::Zero(attribute->value.rows(), attribute->value.cols());
  const Index m = ctx.bary.rows();
  for (Index pix = 0; pix < m; ++pix) {
    const auto& corner = ctx.corners[static_cast<std::size_t>(pix)];
    for (int k = 0; k < 3; ++k)
      grad.row(corner[static_cast<std::size_t>(k)]) +=
          ctx.bary(pix, k) * pixel_grad.row(pix);
  }
}

// q(pix, k) = pixel_grad(pix) . attribute_row(corner k).
Mat corner_dots(const InterpContext& ctx, const Mat& pixel_grad,
                const Mat& attribute_values) {
  const Index m = ctx.bary.rows();
  Mat q(m, 3);
  for (Index pix = 0; pix < m; ++pix) {
    const auto& corner = ctx.corners[static_cast<std::size_t>(pix)];
    for (int k = 0; k < 3; ++k)
      q(pix, k) = pixel_grad.row(pix).dot(
          attribute_values.row(corner[static_cast<std::size_t>(k)]));
  }
  return q;
}

// Interpolated rows: out(pix) = sum_k beta_k * attr(corner_k).
Mat interpolate_rows(const InterpContext& ctx, const Mat& attribute_values) {
  const Index m = ctx.bary.rows();
  Mat out(m, attribute_values.cols());
  for (Index pix = 0; pix < m; ++pix) {
    const auto& corner = ctx.corners[static_cast<std::size_t>(pix)];
    out.row(pix) =
        ctx.bary(pix, 0) * attribute_values.row(corner[0]) +
        ctx.bary(pix, 1) * attribute_values.row(corner[1]) +
        ctx.bary(pix, 2) * attribute_values.row(corner[2]);
  }
  return out;
}

ad::Tensor make_interp_node(const std::shared_ptr<InterpContext>& ctx,
                            const ad::Tensor& positions,
                            const ad::Tensor& attribute, const char* name) {
  Mat value = interpolate_rows(*ctx, attribute.value());
  return ad::make_op(
      std::move(value), {positions, attribute},
      [ctx](ad::Node* self) {
        return [self, ctx]() {
          ad::Node* pos = self->parents[0].get();
          ad::Node* attr = self->parents[1].get();
          if (attr->requires_grad)
            accumulate_attribute_path(*ctx, self->grad, attr);
          if (pos->requires_grad) {
            const Mat q = corner_dots(*ctx, self->grad, attr->value);
            accumulate_bary_path(*ctx, q, pos);
          }
        };
      },
      name);
}

}  // namespace

ImageBuffer GBuffer::to_image(const Mat& rows_values) const {
  ImageBuffer img(coverage.width, coverage.height,
                  static_cast<int>(rows_values.cols()));
  for (std::size_t row = 0; row < coverage.covered.size(); ++row) {
    const int pix = coverage.covered[row];
    for (Index c = 0; c < rows_values.cols(); ++c)
      img.data[static_cast<std::size_t>(pix) * rows_values.cols() + c] =
          static_cast<float>(rows_values(static_cast<Index>(row), c));
  }
  return img;
}

GBuffer rasterize(const ad::Tensor& positions, const ad::Tensor& features,
                  const geom::Mesh& mesh, const Camera& camera,
                  const RasterizeOptions& options) {
  if (features.defined() && features.rows() != positions.rows())
    throw ArgumentError("rasterize: feature rows must match vertices");

  GBuffer gb;
  gb.coverage = options.coverage
                    ? *options.coverage
                    : rasterize_coverage(positions.value(), mesh, camera);

  const ProjectedVertices proj = project_vertices(positions.value(), camera);
  auto ctx = std::make_shared<InterpContext>();
  ctx->rotation = camera.rotation;
  ctx->fx = camera.intrinsics(0, 0);
  ctx->fy = camera.intrinsics(1, 1);
  ctx->skew = camera.intrinsics(0, 1);
  ctx->cam_coords = proj.cam;

  const Index m = static_cast<Index>(gb.coverage.covered.size());
  ctx->corners.resize(static_cast<std::size_t>(m));
  ctx->bary.resize(m, 3);
  ctx->dbary.resize(static_cast<std::size_t>(m));

  const auto& faces = mesh.faces();
  for (Index row = 0; row < m; ++row) {
    const int pix = gb.coverage.covered[static_cast<std::size_t>(row)];
    const int x = pix % gb.coverage.width;
    const int y = pix / gb.coverage.width;
    const geom::Face& face =
        faces[static_cast<std::size_t>(gb.coverage.face_at(pix))];
    const std::array<int, 3> corner{face[0], face[1], face[2]};
    ctx->corners[static_cast<std::size_t>(row)] = corner;

    const Vec2 p(static_cast<Real>(x) + Real(0.5),
                 static_cast<Real>(y) + Real(0.5));
    const Vec2 v[3] = {proj.uv.row(corner[0]).transpose(),
                       proj.uv.row(corner[1]).transpose(),
                       proj.uv.row(corner[2]).transpose()};
    const Real z[3] = {proj.depth[corner[0]], proj.depth[corner[1]],
                       proj.depth[corner[2]]};

    const Real D = cross2(v[1] - v[0], v[2] - v[0]);
    const Real numer[3] = {cross2(v[1] - p, v[2] - p),
                           cross2(v[2] - p, v[0] - p),
                           cross2(v[0] - p, v[1] - p)};
    const Real inv_d = Real(1) / D;
    Real w[3], t[3];
    Real s = 0;
    for (int k = 0; k < 3; ++k) {
      w[k] = numer[k] * inv_d;
      t[k] = w[k] / z[k];
      s += t[k];
    }
    const Real inv_s = Real(1) / s;
    for (int k = 0; k < 3; ++k) ctx->bary(row, k) = t[k] * inv_s;

    // dN_i/dv_j and dD/dv_j (2D each), then assembled into dbeta/d(u,v,z).
    Vec2 dn[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) dn[i][j] = Vec2::Zero();
    for (int i = 0; i < 3; ++i) {
      const int jn = (i + 1) % 3;  // "y" slot of E(p, y, z)
      const int jz = (i + 2) % 3;  // "z" slot
      dn[i][jn] = perp(v[jz] - p);
      dn[i][jz] = -perp(v[jn] - p);
    }
    Vec2 dd[3];
    for (int j = 0; j < 3; ++j) dd[j] = perp(v[(j + 1) % 3] - v[(j + 2) % 3]);

    // dw_m/dv_j = (dN_m - w_m * dD) / D and
    // d(beta_k)/dw_m = (delta_km * S - t_k) / (z_m * S^2); the uv derivative
    // chains through every screen weight: d(beta_k)/dv_j =
    // sum_m d(beta_k)/dw_m * dw_m/dv_j.
    Vec2 dwdv[3][3];
    for (int m = 0; m < 3; ++m)
      for (int j = 0; j < 3; ++j)
        dwdv[m][j] =
            (dn[m][j] - Vec2(w[m] * dd[j].x(), w[m] * dd[j].y())) * inv_d;

    auto& out = ctx->dbary[static_cast<std::size_t>(row)];
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 3; ++j) {
        Vec2 duv = Vec2::Zero();
        for (int m = 0; m < 3; ++m) {
          const Real d_beta_dw =
              ((k == m ? s : Real(0)) - t[k]) / z[m] * inv_s * inv_s;
          duv += d_beta_dw * dwdv[m][j];
        }
        // d(beta_k)/dz_j = (-delta_kj w_k/z_k^2 * S + t_k w_j/z_j^2) / S^2
        const Real dz =
            (-(k == j ? w[k] / (z[k] * z[k]) * s : Real(0)) +
             t[k] * w[j] / (z[j] * z[j])) *
            inv_s * inv_s;
        out[static_cast<std::size_t>(k * 9 + j * 3 + 0)] = duv.x();
        out[static_cast<std::size_t>(k * 9 + j * 3 + 1)] = duv.y();
        out[static_cast<std::size_t>(k * 9 + j * 3 + 2)] = dz;
      }
  }

  const ad::Tensor vnormals =
      options.vertex_normals ? *options.vertex_normals
                             : vertex_normal_tensor(positions, mesh);

  gb.barycentric = ctx->bary;
  gb.position = make_interp_node(ctx, positions, positions, "raster_position");
  gb.normal = ad::normalize_rows(
      make_interp_node(ctx, positions, vnormals, "raster_normal"));
  if (features.defined() && features.cols() > 0) {
    gb.feature = make_interp_node(ctx, positions, features, "raster_feature");
  } else {
    gb.feature = ad::Tensor::constant(Mat::Zero(m, 0));
  }
  return gb;
}

namespace {

// Signed distance from p to the occluding contour through one candidate
// face, plus its gradient with respect to the three projected vertices.
// Inside the projected triangle the distance is measured to the face's
// silhouette edges only (interior mesh edges are not part of the contour);
// a face with no silhouette edge saturates. Outside, the (negative)
// distance to the triangle boundary is used.
struct SignedDistance {
  Real value = 0;
  Vec2 dvertex[3] = {Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
};

constexpr Real kSaturatedDistance = Real(1e6);

SignedDistance triangle_signed_distance(const Vec2& p, const Vec2 v[3],
                                        const std::array<bool, 3>& silhouette) {
  SignedDistance out;
  // Inside test robust to either winding: all edge crosses share the area
  // sign.
  const Real area = cross2(v[1] - v[0], v[2] - v[0]);
  const Real s0 = cross2(v[1] - v[0], p - v[0]);
  const Real s1 = cross2(v[2] - v[1], p - v[1]);
  const Real s2 = cross2(v[0] - v[2], p - v[2]);
  const bool inside =
      area > Real(0) ? (s0 >= 0 && s1 >= 0 && s2 >= 0)
                     : (area < Real(0) ? (s0 <= 0 && s1 <= 0 && s2 <= 0)
                                       : false);

  Real best = std::numeric_limits<Real>::infinity();
  int best_edge = -1;
  Real best_t = 0;
  for (int e = 0; e < 3; ++e) {
    if (inside && !silhouette[static_cast<std::size_t>(e)]) continue;
    const Vec2& s = v[e];
    const Vec2 dvec = v[(e + 1) % 3] - s;
    const Real len2 = dvec.squaredNorm();
    Real t = len2 > Real(0) ? (p - s).dot(dvec) / len2 : Real(0);
    t = std::clamp(t, Real(0), Real(1));
    const Real dist = (p - (s + t * dvec)).norm();
    if (dist < best) {
      best = dist;
      best_edge = e;
      best_t = t;
    }
  }

  if (best_edge < 0) {  // inside with no silhouette edge on this face
    out.value = kSaturatedDistance;
    return out;
  }

  const Real sign = inside ? Real(1) : Real(-1);
  out.value = sign * best;
  if (best > Real(1e-12)) {
    const int e0 = best_edge;
    const int e1 = (best_edge + 1) % 3;
    const Vec2 q = v[e0] + best_t * (v[e1] - v[e0]);
    const Vec2 dir = (p - q) / best;
    // Envelope theorem: t is optimal, so only the explicit endpoint
    // dependence contributes.
    out.dvertex[e0] = -sign * (Real(1) - best_t) * dir;
    out.dvertex[e1] = -sign * best_t * dir;
  }
  return out;
}

}  // namespace

SilhouetteBand silhouette_band(const RasterCoverage& coverage,
                               const Mat& positions, const geom::Mesh& mesh,
                               const Camera& camera, int band_px) {
  SilhouetteBand band;
  band.width = coverage.width;
  band.height = coverage.height;
  band.band_px = band_px;
  const int w = coverage.width, h = coverage.height;
  band.in_band.assign(static_cast<std::size_t>(w) * h, 0);
  if (coverage.empty()) {
    band.candidate_offsets.assign(1, 0);
    band.fixed_sum = 0;
    band.fixed_one.assign(static_cast<std::size_t>(w) * h, 0);
    return band;
  }

  // Boundary pixels: covered next to uncovered (4-neighborhood) or at the
  // image border.
  std::vector<std::uint8_t> boundary(static_cast<std::size_t>(w) * h, 0);
  auto covered_at = [&](int x, int y) {
    return coverage.face_id[static_cast<std::size_t>(y) * w + x] >= 0;
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!covered_at(x, y)) continue;
      const bool edge =
          x == 0 || y == 0 || x == w - 1 || y == h - 1 ||
          !covered_at(x - 1, y) || !covered_at(x + 1, y) ||
          !covered_at(x, y - 1) || !covered_at(x, y + 1);
      if (edge) boundary[static_cast<std::size_t>(y) * w + x] = 1;
    }

  // Chebyshev dilation by band_px.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!boundary[static_cast<std::size_t>(y) * w + x]) continue;
      for (int dy = -band_px; dy <= band_px; ++dy)
        for (int dx = -band_px; dx <= band_px; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          band.in_band[static_cast<std::size_t>(ny) * w + nx] = 1;
        }
    }

  for (int pix = 0; pix < w * h; ++pix)
    if (band.in_band[static_cast<std::size_t>(pix)])
      band.band.push_back(pix);

  // Fixed (saturated) region: covered outside the band contributes 1.
  band.fixed_one.assign(static_cast<std::size_t>(w) * h, 0);
  long covered_fixed = 0;
  for (int pix : coverage.covered)
    if (!band.in_band[static_cast<std::size_t>(pix)]) {
      band.fixed_one[static_cast<std::size_t>(pix)] = 1;
      ++covered_fixed;
    }
  band.fixed_sum = static_cast<double>(covered_fixed);

  // Candidate faces: any face visible at a band pixel, splatted over its
  // dilated projected bbox.
  std::set<int> silhouette_faces;
  for (int pix : band.band) {
    const int f = coverage.face_id[static_cast<std::size_t>(pix)];
    if (f >= 0) silhouette_faces.insert(f);
  }

  const ProjectedVertices proj = project_vertices(positions, camera);
  std::vector<std::vector<int>> per_pixel(band.band.size());
  std::vector<int> pixel_slot(static_cast<std::size_t>(w) * h, -1);
  for (std::size_t i = 0; i < band.band.size(); ++i)
    pixel_slot[static_cast<std::size_t>(band.band[i])] = static_cast<int>(i);

  const auto& faces = mesh.faces();
  for (int f : silhouette_faces) {
    const geom::Face& face = faces[static_cast<std::size_t>(f)];
    if (!proj.valid[face[0]] || !proj.valid[face[1]] || !proj.valid[face[2]])
      continue;
    Real min_x = std::numeric_limits<Real>::infinity(), max_x = -min_x;
    Real min_y = min_x, max_y = -min_x;
    for (int k = 0; k < 3; ++k) {
      min_x = std::min(min_x, proj.uv(face[k], 0));
      max_x = std::max(max_x, proj.uv(face[k], 0));
      min_y = std::min(min_y, proj.uv(face[k], 1));
      max_y = std::max(max_y, proj.uv(face[k], 1));
    }
    const int pad = band_px + 1;
    const int x0 = std::max(0, static_cast<int>(std::floor(min_x)) - pad);
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(max_x)) + pad);
    const int y0 = std::max(0, static_cast<int>(std::floor(min_y)) - pad);
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(max_y)) + pad);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const int slot = pixel_slot[static_cast<std::size_t>(y) * w + x];
        if (slot >= 0) per_pixel[static_cast<std::size_t>(slot)].push_back(f);
      }
  }

  band.candidate_offsets.resize(band.band.size() + 1, 0);
  for (std::size_t i = 0; i < per_pixel.size(); ++i)
    band.candidate_offsets[i + 1] =
        band.candidate_offsets[i] + static_cast<int>(per_pixel[i].size());
  band.candidate_faces.reserve(
      static_cast<std::size_t>(band.candidate_offsets.back()));
  for (const auto& list : per_pixel)
    band.candidate_faces.insert(band.candidate_faces.end(), list.begin(),
                                list.end());
  return band;
}

ImageBuffer SoftMask::to_image() const {
  ImageBuffer img(band->width, band->height, 1);
  for (std::size_t pix = 0; pix < band->fixed_one.size(); ++pix)
    if (band->fixed_one[pix]) img.data[pix] = 1.0f;
  for (std::size_t i = 0; i < band->band.size(); ++i)
    img.data[static_cast<std::size_t>(band->band[i])] =
        static_cast<float>(band_values.value()(static_cast<Index>(i), 0));
  return img;
}

SoftMask soft_mask(const ad::Tensor& positions, const geom::Mesh& mesh,
                   const Camera& camera, Real sharpness,
                   const SilhouetteBand& band_in) {
  if (!(sharpness > Real(0)))
    throw ArgumentError("soft_mask: sharpness must be positive");
  auto band = std::make_shared<SilhouetteBand>(band_in);
  const Index b = static_cast<Index>(band->band.size());

  const ProjectedVertices proj = project_vertices(positions.value(), camera);
  const auto& faces = mesh.faces();

  // Occluding-contour edges: sign changes of the projected signed area
  // across an edge (or a missing/clipped neighbor).
  std::vector<Real> face_area(faces.size(), Real(0));
  std::vector<std::uint8_t> face_ok(faces.size(), 0);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const geom::Face& face = faces[f];
    if (!proj.valid[face[0]] || !proj.valid[face[1]] || !proj.valid[face[2]])
      continue;
    face_ok[f] = 1;
    const Vec2 a = proj.uv.row(face[0]).transpose();
    const Vec2 bb = proj.uv.row(face[1]).transpose();
    const Vec2 c = proj.uv.row(face[2]).transpose();
    face_area[f] = cross2(bb - a, c - a);
  }
  const auto& mesh_edges = mesh.edges();
  const auto& edge_faces = mesh.edge_faces();
  auto edge_is_silhouette = [&](int face_idx, int corner) {
    const geom::Face& face = faces[static_cast<std::size_t>(face_idx)];
    const int a = face[corner];
    const int bb = face[(corner + 1) % 3];
    const std::array<int, 2> key{std::min(a, bb), std::max(a, bb)};
    const auto it =
        std::lower_bound(mesh_edges.begin(), mesh_edges.end(), key);
    if (it == mesh_edges.end() || *it != key) return true;
    const geom::EdgeFaces& ef =
        edge_faces[static_cast<std::size_t>(it - mesh_edges.begin())];
    const int other = ef.left == face_idx ? ef.right : ef.left;
    if (other < 0 || !face_ok[static_cast<std::size_t>(other)]) return true;
    return face_area[static_cast<std::size_t>(face_idx)] *
               face_area[static_cast<std::size_t>(other)] <=
           Real(0);
  };

  struct BackwardEntry {
    int face = -1;
    Real dsigmoid = 0;  // sigma'(k d) * k
    Vec2 dvertex[3];
  };
  auto entries = std::make_shared<std::vector<BackwardEntry>>(
      static_cast<std::size_t>(b));

  Mat values = Mat::Zero(b, 1);
  for (Index i = 0; i < b; ++i) {
    const int pix = band->band[static_cast<std::size_t>(i)];
    const int x = pix % band->width;
    const int y = pix / band->width;
    const Vec2 p(static_cast<Real>(x) + Real(0.5),
                 static_cast<Real>(y) + Real(0.5));
    const int begin = band->candidate_offsets[static_cast<std::size_t>(i)];
    const int end = band->candidate_offsets[static_cast<std::size_t>(i) + 1];

    Real best_d = -std::numeric_limits<Real>::infinity();
    SignedDistance best_sd;
    int best_face = -1;
    for (int c = begin; c < end; ++c) {
      const int f = band->candidate_faces[static_cast<std::size_t>(c)];
      const geom::Face& face = faces[static_cast<std::size_t>(f)];
      if (!face_ok[static_cast<std::size_t>(f)]) continue;
      const Vec2 v[3] = {proj.uv.row(face[0]).transpose(),
                         proj.uv.row(face[1]).transpose(),
                         proj.uv.row(face[2]).transpose()};
      const std::array<bool, 3> silhouette{edge_is_silhouette(f, 0),
                                           edge_is_silhouette(f, 1),
                                           edge_is_silhouette(f, 2)};
      const SignedDistance sd = triangle_signed_distance(p, v, silhouette);
      if (sd.value > best_d) {
        best_d = sd.value;
        best_sd = sd;
        best_face = f;
      }
    }
    if (best_face < 0) {
      values(i, 0) = Real(0);
      continue;
    }
    const Real arg = sharpness * best_d;
    const Real sig = arg >= Real(0)
                         ? Real(1) / (Real(1) + std::exp(-arg))
                         : std::exp(arg) / (Real(1) + std::exp(arg));
    values(i, 0) = sig;
    auto& entry = (*entries)[static_cast<std::size_t>(i)];
    entry.face = best_face;
    entry.dsigmoid = sig * (Real(1) - sig) * sharpness;
    for (int k = 0; k < 3; ++k) entry.dvertex[k] = best_sd.dvertex[k];
  }

  const Mat3 rotation = camera.rotation;
  const Real fx = camera.intrinsics(0, 0);
  const Real fy = camera.intrinsics(1, 1);
  const Real skew = camera.intrinsics(0, 1);
  auto cam_coords = std::make_shared<Mat>(proj.cam);
  auto face_list = std::make_shared<std::vector<geom::Face>>(mesh.faces());

  SoftMask out;
  out.band = band;
  out.total_pixels = static_cast<Index>(band->width) * band->height;
  out.band_values = ad::make_op(
      std::move(values), {positions},
      [entries, cam_coords, face_list, rotation, fx, fy, skew](ad::Node* self) {
        return [self, entries, cam_coords, face_list, rotation, fx, fy,
                skew]() {
          ad::Node* pos = self->parents[0].get();
          Mat& grad = pos->grad;
          if (grad.size() == 0)
            grad = Mat::Zero(pos->value.rows(), pos->value.cols());
          for (std::size_t i = 0; i < entries->size(); ++i) {
            const auto& entry = (*entries)[i];
            if (entry.face < 0) continue;
            const Real g =
                self->grad(static_cast<Index>(i), 0) * entry.dsigmoid;
            if (g == Real(0)) continue;
            const geom::Face& face =
                (*face_list)[static_cast<std::size_t>(entry.face)];
            for (int k = 0; k < 3; ++k) {
              const Vec2 duv = g * entry.dvertex[k];
              if (duv.x() == Real(0) && duv.y() == Real(0)) continue;
              const int vid = face[k];
              const Real X = (*cam_coords)(vid, 0);
              const Real Y = (*cam_coords)(vid, 1);
              const Real Z = (*cam_coords)(vid, 2);
              const Real inv_z = Real(1) / Z;
              Vec3 dcam;
              dcam.x() = duv.x() * fx * inv_z;
              dcam.y() = duv.x() * skew * inv_z + duv.y() * fy * inv_z;
              dcam.z() = -duv.x() * (fx * X + skew * Y) * inv_z * inv_z -
                         duv.y() * fy * Y * inv_z * inv_z;
              grad.row(vid) += (rotation.transpose() * dcam).transpose();
            }
          }
        };
      },
      "soft_mask");
  return out;
}

}  // namespace defsurf::render
