#include "poolseed/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "poolseed/error.hpp"

namespace poolseed::report {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Curve aggregate_curves(const std::vector<al::ExperimentRecord>& group) {
  require(!group.empty(), Err::EmptyGroup, "no records to aggregate");
  const auto& first = group.front();
  for (const auto& r : group) {
    require(r.fingerprint == first.fingerprint, Err::MixedConfigs,
            "records from different configs in one group");
    require(r.test_accuracy.size() == first.test_accuracy.size(), Err::MixedConfigs,
            "records disagree on cycle count");
    require(r.labeled_sizes == first.labeled_sizes, Err::MixedConfigs,
            "records disagree on labeled pool sizes");
  }
  const std::size_t cycles = first.test_accuracy.size();
  const std::size_t n = group.size();
  Curve curve;
  curve.labeled_sizes = first.labeled_sizes;
  curve.records = static_cast<int>(n);
  curve.mean.resize(cycles, 0.0);
  curve.stddev.resize(cycles, 0.0);
  for (std::size_t t = 0; t < cycles; ++t) {
    double sum = 0.0;
    for (const auto& r : group) sum += r.test_accuracy[t];
    const double mean = sum / n;
    curve.mean[t] = mean;
    if (n > 1) {
      double ss = 0.0;
      for (const auto& r : group) {
        const double d = r.test_accuracy[t] - mean;
        ss += d * d;
      }
      curve.stddev[t] = std::sqrt(ss / (n - 1));
    }
  }
  return curve;
}

double jaccard(const std::vector<int>& a, const std::vector<int>& b) {
  const std::set<int> sa(a.begin(), a.end());
  const std::set<int> sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (int v : sa) inter += sb.count(v);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

std::vector<double> pool_overlap(const al::ExperimentRecord& a, const al::ExperimentRecord& b) {
  require(a.dataset_fp == b.dataset_fp, Err::MismatchedRuns, "records from different datasets");
  require(a.cycle_indices.size() == b.cycle_indices.size(), Err::MismatchedRuns,
          "records disagree on cycle count");
  std::vector<double> out;
  for (std::size_t t = 0; t <= a.cycle_indices.size(); ++t)
    out.push_back(jaccard(a.labeled_at(static_cast<int>(t)), b.labeled_at(static_cast<int>(t))));
  return out;
}

namespace {

// x^T C x step for the centered data operator C = X^T X / (n-1), matrix-free
std::vector<double> cov_apply(const Matrix& centered, const std::vector<double>& v) {
  const int n = centered.rows, d = centered.cols;
  std::vector<double> xv(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* row = centered.row(i);
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += row[j] * v[j];
    xv[i] = acc;
  }
  std::vector<double> out(d, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* row = centered.row(i);
    const double a = xv[i];
    for (int j = 0; j < d; ++j) out[j] += a * row[j];
  }
  const double denom = n > 1 ? double(n - 1) : 1.0;
  for (double& x : out) x /= denom;
  return out;
}

void orthogonalize(std::vector<double>& v, const std::vector<double>& against) {
  double dot = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) dot += v[j] * against[j];
  for (std::size_t j = 0; j < v.size(); ++j) v[j] -= dot * against[j];
}

double vec_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

// deterministic power iteration; `prev` is deflated out when present
std::vector<double> top_component(const Matrix& centered, const std::vector<double>* prev) {
  const int d = centered.cols;
  std::vector<double> v(d);
  for (int j = 0; j < d; ++j) v[j] = 1.0 + 0.5 * (j + 1) / double(d);  // generic start
  if (prev) orthogonalize(v, *prev);
  double norm = vec_norm(v);
  if (norm == 0.0) {
    v.assign(d, 0.0);
    v[0] = 1.0;
  } else {
    for (double& x : v) x /= norm;
  }
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<double> next = cov_apply(centered, v);
    if (prev) orthogonalize(next, *prev);
    const double next_norm = vec_norm(next);
    if (next_norm < 1e-300) break;  // data has no variance in this subspace
    for (double& x : next) x /= next_norm;
    double delta = 0.0;
    for (int j = 0; j < d; ++j) delta = std::max(delta, std::abs(next[j] - v[j]));
    // sign flips between iterations mean oscillation around +-v
    double delta_neg = 0.0;
    for (int j = 0; j < d; ++j) delta_neg = std::max(delta_neg, std::abs(next[j] + v[j]));
    v = std::move(next);
    if (std::min(delta, delta_neg) < 1e-13) break;
  }
  // sign convention: largest-magnitude loading positive
  int arg = 0;
  for (int j = 1; j < d; ++j)
    if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
  if (v[arg] < 0.0)
    for (double& x : v) x = -x;
  return v;
}

}  // namespace

Matrix project_2d(const Matrix& features, const std::vector<int>& indices) {
  require(indices.size() >= 2, Err::TooFewSamples, "projection needs at least 2 samples");
  require(features.cols >= 2, Err::TooFewSamples, "projection needs at least 2 feature columns");
  Matrix centered = gather_rows(features, indices);
  const int n = centered.rows, d = centered.cols;
  std::vector<double> mean(d, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* row = centered.row(i);
    for (int j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= n;
  for (int i = 0; i < n; ++i) {
    double* row = centered.row(i);
    for (int j = 0; j < d; ++j) row[j] -= mean[j];
  }

  const auto pc1 = top_component(centered, nullptr);
  auto pc2 = top_component(centered, &pc1);
  orthogonalize(pc2, pc1);
  const double norm2 = vec_norm(pc2);
  if (norm2 > 0.0)
    for (double& x : pc2) x /= norm2;

  Matrix coords(n, 2);
  for (int i = 0; i < n; ++i) {
    const double* row = centered.row(i);
    double a = 0.0, b = 0.0;
    for (int j = 0; j < d; ++j) {
      a += row[j] * pc1[j];
      b += row[j] * pc2[j];
    }
    coords(i, 0) = a;
    coords(i, 1) = b;
  }
  return coords;
}

void emit_curve_csv(const Curve& curve, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Err::IoFailure, "cannot write " + path);
  out << "cycle,labeled_count,mean_acc,std_acc\n";
  for (std::size_t t = 0; t < curve.mean.size(); ++t)
    out << t << "," << curve.labeled_sizes[t] << "," << format_double(curve.mean[t]) << ","
        << format_double(curve.stddev[t]) << "\n";
  require(out.good(), Err::IoFailure, "write failed: " + path);
}

void emit_curve_jsonl(const Curve& curve, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Err::IoFailure, "cannot write " + path);
  for (std::size_t t = 0; t < curve.mean.size(); ++t)
    out << "{\"cycle\":" << t << ",\"labeled_count\":" << curve.labeled_sizes[t]
        << ",\"mean_acc\":" << format_double(curve.mean[t])
        << ",\"std_acc\":" << format_double(curve.stddev[t]) << "}\n";
  require(out.good(), Err::IoFailure, "write failed: " + path);
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct SvgScale {
  double x0, x1, y0, y1;
  double px(double x) const { return 70.0 + (x - x0) / (x1 - x0) * 640.0; }
  double py(double y) const { return 30.0 + (y1 - y) / (y1 - y0) * 380.0; }
};

}  // namespace

void emit_curves_svg(const std::vector<NamedCurve>& curves, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Err::IoFailure, "cannot write " + path);

  double x0 = 0.0, x1 = 1.0, y0 = 1.0, y1 = 0.0;
  bool any = false;
  for (const auto& nc : curves) {
    for (std::size_t t = 0; t < nc.curve.mean.size(); ++t) {
      const double x = nc.curve.labeled_sizes[t];
      const double lo = nc.curve.mean[t] - nc.curve.stddev[t];
      const double hi = nc.curve.mean[t] + nc.curve.stddev[t];
      if (!any) {
        x0 = x1 = x;
        y0 = lo;
        y1 = hi;
        any = true;
      }
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, lo);
      y1 = std::max(y1, hi);
    }
  }
  if (!any) {
    x0 = 0.0;
    x1 = 1.0;
    y0 = 0.0;
    y1 = 1.0;
  }
  if (x1 == x0) x1 = x0 + 1.0;
  if (y1 == y0) y1 = y0 + 1.0;
  const SvgScale s{x0, x1, y0, y1};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"470\" "
         "viewBox=\"0 0 760 470\">\n";
  out << "<rect width=\"760\" height=\"470\" fill=\"white\"/>\n";
  out << "<line x1=\"70\" y1=\"410\" x2=\"710\" y2=\"410\" stroke=\"black\"/>\n";
  out << "<line x1=\"70\" y1=\"30\" x2=\"70\" y2=\"410\" stroke=\"black\"/>\n";
  out << "<text x=\"390\" y=\"450\" text-anchor=\"middle\" font-size=\"14\">labeled samples</text>\n";
  out << "<text x=\"20\" y=\"220\" transform=\"rotate(-90 20 220)\" text-anchor=\"middle\" "
         "font-size=\"14\">test accuracy</text>\n";

  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& curve = curves[c].curve;
    const char* color = kPalette[c % 10];
    // std band
    std::ostringstream band;
    for (std::size_t t = 0; t < curve.mean.size(); ++t)
      band << format_double(s.px(curve.labeled_sizes[t])) << ","
           << format_double(s.py(curve.mean[t] + curve.stddev[t])) << " ";
    for (std::size_t t = curve.mean.size(); t-- > 0;)
      band << format_double(s.px(curve.labeled_sizes[t])) << ","
           << format_double(s.py(curve.mean[t] - curve.stddev[t])) << " ";
    out << "<polygon points=\"" << band.str() << "\" fill=\"" << color
        << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    // mean polyline
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t t = 0; t < curve.mean.size(); ++t)
      out << format_double(s.px(curve.labeled_sizes[t])) << ","
          << format_double(s.py(curve.mean[t])) << " ";
    out << "\"/>\n";
    // legend
    const double ly = 40.0 + 18.0 * c;
    out << "<line x1=\"560\" y1=\"" << format_double(ly) << "\" x2=\"590\" y2=\""
        << format_double(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"596\" y=\"" << format_double(ly + 4.0) << "\" font-size=\"11\">"
        << curves[c].label << "</text>\n";
  }
  out << "</svg>\n";
  require(out.good(), Err::IoFailure, "write failed: " + path);
}

void emit_overlaps_csv(const std::vector<OverlapRow>& rows, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Err::IoFailure, "cannot write " + path);
  out << "group_a,group_b,seed,cycle,jaccard\n";
  for (const auto& r : rows)
    out << r.group_a << "," << r.group_b << "," << r.seed << "," << r.cycle << ","
        << format_double(r.jaccard) << "\n";
  require(out.good(), Err::IoFailure, "write failed: " + path);
}

void emit_overlaps_jsonl(const std::vector<OverlapRow>& rows, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Err::IoFailure, "cannot write " + path);
  for (const auto& r : rows)
    out << "{\"group_a\":\"" << r.group_a << "\",\"group_b\":\"" << r.group_b
        << "\",\"seed\":" << r.seed << ",\"cycle\":" << r.cycle
        << ",\"jaccard\":" << format_double(r.jaccard) << "}\n";
  require(out.good(), Err::IoFailure, "write failed: " + path);
}

void emit_projection_csv(const std::vector<ProjectionRow>& rows, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Err::IoFailure, "cannot write " + path);
  out << "seed,index,x,y\n";
  for (const auto& r : rows)
    out << r.seed << "," << r.index << "," << format_double(r.x) << "," << format_double(r.y)
        << "\n";
  require(out.good(), Err::IoFailure, "write failed: " + path);
}

void emit_margins_csv(const std::vector<MarginRow>& rows, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Err::IoFailure, "cannot write " + path);
  out << "group,baseline,cycle,margin\n";
  for (const auto& r : rows)
    out << r.group << "," << r.baseline << "," << r.cycle << "," << format_double(r.margin)
        << "\n";
  require(out.good(), Err::IoFailure, "write failed: " + path);
}

}  // namespace poolseed::report
