#include "divrec/exp/projection.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "divrec/errors.hpp"

namespace divrec::exp {

Projection project_pca(const div::EmbeddingBatch& batch) {
  const std::size_t n = batch.vectors.size();
  if (n < 2) throw ProjectionError("projection needs at least 2 samples, got " + std::to_string(n));
  if (batch.class_ids.size() != n) throw ProjectionError("class ids do not match the embeddings");
  const std::size_t d = batch.vectors.front().size();
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (batch.vectors[i].size() != d) throw ProjectionError("embeddings have mixed widths");
    for (std::size_t j = 0; j < d; ++j) x(i, j) = batch.vectors[i][j];
  }
  x.rowwise() -= x.colwise().mean();
  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Projection out;
  Eigen::MatrixXd comps(d, 2);
  comps.setZero();
  for (int c = 0; c < 2 && c < static_cast<int>(d); ++c) {
    const int idx = static_cast<int>(d) - 1 - c;  // eigenvalues ascend
    Eigen::VectorXd v = eig.eigenvectors().col(idx);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0) v = -v;
    comps.col(c) = v;
    out.explained[c] = std::max(0.0, eig.eigenvalues()(idx));
  }
  Eigen::MatrixXd y = x * comps;
  for (std::size_t i = 0; i < n; ++i) {
    // Exact zeros for degenerate input instead of rounding noise.
    const double px = std::abs(y(i, 0)) < 1e-12 ? 0.0 : y(i, 0);
    const double py = std::abs(y(i, 1)) < 1e-12 ? 0.0 : y(i, 1);
    out.points.push_back({i < batch.sample_ids.size() ? batch.sample_ids[i] : std::to_string(i), batch.class_ids[i], px, py});
  }
  return out;
}

double centroid_spread(const Projection& p) {
  std::map<int, std::pair<double, double>> sum;
  std::map<int, std::size_t> count;
  for (const auto& pt : p.points) {
    sum[pt.class_id].first += pt.x;
    sum[pt.class_id].second += pt.y;
    ++count[pt.class_id];
  }
  std::vector<std::pair<double, double>> c;
  for (const auto& [k, s] : sum) c.emplace_back(s.first / count[k], s.second / count[k]);
  if (c.size() < 2) throw ProjectionError("centroid spread needs at least two classes");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < c.size(); ++a) {
    for (std::size_t b = a + 1; b < c.size(); ++b, ++pairs) {
      total += std::hypot(c[a].first - c[b].first, c[a].second - c[b].second);
    }
  }
  return total / static_cast<double>(pairs);
}

void write_projection_csv(const std::filesystem::path& path, const Projection& p) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "sample_id,class_id,x,y\n";
  for (const auto& pt : p.points) out << pt.sample_id << ',' << pt.class_id << ',' << pt.x << ',' << pt.y << '\n';
}

void write_projection_svg(const std::filesystem::path& path, const Projection& p, const std::string& title) {
  static const char* palette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                  "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};
  constexpr double kSize = 480.0, kPad = 30.0;
  double lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0;
  for (const auto& pt : p.points) {
    lo_x = std::min(lo_x, pt.x), hi_x = std::max(hi_x, pt.x);
    lo_y = std::min(lo_y, pt.y), hi_y = std::max(hi_y, pt.y);
  }
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
  auto sx = [&](double v) { return kPad + (v - lo_x) / span * (kSize - 2 * kPad); };
  auto sy = [&](double v) { return kSize - kPad - (v - lo_y) / span * (kSize - 2 * kPad); };

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"10\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">" << title << "</text>\n";
  for (const auto& pt : p.points) {
    out << "<circle cx=\"" << sx(pt.x) << "\" cy=\"" << sy(pt.y) << "\" r=\"3\" fill=\""
        << palette[static_cast<std::size_t>(pt.class_id) % 10] << "\" fill-opacity=\"0.75\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace divrec::exp
