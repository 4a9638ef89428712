#include "gsrefine/exposure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "gsrefine/kernels.hpp"
#include "gsrefine/rng.hpp"

namespace gsrefine {

LuminanceHistogram luminance_histogram(const Image& image) {
  LuminanceHistogram h;
  const std::size_t n = image.npixels();
  if (n == 0) {
    return h;
  }
  std::vector<double> y(n);
  kernels::active().luminance_row(image.r.data(), image.g.data(),
                                  image.b.data(), static_cast<int>(n),
                                  y.data());
  for (double v : y) {
    int bin = static_cast<int>(v * 10.0);
    bin = std::clamp(bin, 0, 9);
    h.bins[bin] += 1.0;
  }
  for (double& w : h.bins) {
    w /= static_cast<double>(n);
  }
  return h;
}

Image apply_act(const ColorAffine& affine, const Image& image) {
  Image out(image.width, image.height);
  if (image.empty()) {
    return out;
  }
  double q9[9];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      q9[3 * r + c] = affine.Q(r, c);
    }
  }
  const double b3[3] = {affine.b.x(), affine.b.y(), affine.b.z()};
  kernels::active().affine_row(q9, b3, image.r.data(), image.g.data(),
                               image.b.data(),
                               static_cast<int>(image.npixels()), out.r.data(),
                               out.g.data(), out.b.data());
  return out;
}

ColorAffine fit_affine_ls(const Image& rendered, const Image& target,
                          const std::vector<std::uint8_t>* mask) {
  if (rendered.width != target.width || rendered.height != target.height) {
    throw std::invalid_argument("fit_affine_ls: image sizes differ");
  }
  std::vector<std::size_t> pixels;
  for (std::size_t i = 0; i < rendered.npixels(); ++i) {
    if (!mask || (*mask)[i]) {
      pixels.push_back(i);
    }
  }
  if (pixels.size() < 4) {
    throw std::runtime_error("fit_affine_ls: need at least 4 masked pixels");
  }
  Eigen::MatrixXd design(pixels.size(), 4);
  Eigen::MatrixXd rhs(pixels.size(), 3);
  for (std::size_t row = 0; row < pixels.size(); ++row) {
    const std::size_t i = pixels[row];
    design(row, 0) = rendered.r[i];
    design(row, 1) = rendered.g[i];
    design(row, 2) = rendered.b[i];
    design(row, 3) = 1.0;
    rhs(row, 0) = target.r[i];
    rhs(row, 1) = target.g[i];
    rhs(row, 2) = target.b[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < 4) {
    throw std::runtime_error(
        "fit_affine_ls: rank-deficient design (constant or degenerate "
        "render colors)");
  }
  const Eigen::MatrixXd beta = qr.solve(rhs);  // 4x3, column per channel
  ColorAffine a;
  a.Q = beta.topRows<3>().transpose();
  a.b = beta.row(3).transpose();
  return a;
}

ActNetwork ActNetwork::init(std::uint64_t seed) {
  Rng rng(seed);
  const auto he = [&rng](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    const double stddev = std::sqrt(2.0 / static_cast<double>(cols));
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        m(r, c) = stddev * rng.normal();
      }
    }
    return m;
  };
  ActNetwork net;
  net.w1 = he(64, 10);
  net.w2 = he(64, 64);
  net.w3 = he(64, 64);
  net.w4 = Eigen::MatrixXd::Zero(12, 64);  // identity transform before training
  net.b1 = Eigen::VectorXd::Zero(64);
  net.b2 = Eigen::VectorXd::Zero(64);
  net.b3 = Eigen::VectorXd::Zero(64);
  net.b4 = Eigen::VectorXd::Zero(12);
  return net;
}

std::size_t ActNetwork::parameter_count() const {
  return w1.size() + w2.size() + w3.size() + w4.size() + b1.size() +
         b2.size() + b3.size() + b4.size();
}

namespace {

struct ForwardTrace {
  Eigen::VectorXd x, z1, h1, z2, h2, z3, h3, out;
};

ForwardTrace forward_trace(const ActNetwork& net,
                           const LuminanceHistogram& hist) {
  ForwardTrace t;
  t.x = Eigen::Map<const Eigen::VectorXd>(hist.bins.data(), 10);
  t.z1 = net.w1 * t.x + net.b1;
  t.h1 = t.z1.cwiseMax(0.0);
  t.z2 = net.w2 * t.h1 + net.b2;
  t.h2 = t.z2.cwiseMax(0.0);
  t.z3 = net.w3 * t.h2 + net.b3;
  t.h3 = t.z3.cwiseMax(0.0);
  t.out = net.w4 * t.h3 + net.b4;
  return t;
}

ColorAffine affine_from_output(const Eigen::VectorXd& out) {
  ColorAffine a;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      a.Q(r, c) += out[3 * r + c];
    }
  }
  a.b = out.tail<3>();
  return a;
}

/// Fixed pixel subset used for training on large images.
std::vector<std::size_t> training_pixels(std::size_t npixels,
                                         std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(npixels);
  for (std::size_t i = 0; i < npixels; ++i) {
    idx[i] = i;
  }
  if (npixels <= limit) {
    return idx;
  }
  for (std::size_t i = 0; i < limit; ++i) {  // partial Fisher-Yates
    const std::size_t j = i + rng.uniform_index(npixels - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  return idx;
}

double loss_and_grad(const ActNetwork& net, const std::vector<ImagePair>& pairs,
                     const std::vector<std::vector<std::size_t>>* subsets,
                     ActGradients* grads) {
  if (pairs.empty()) {
    throw std::invalid_argument("act: need at least one training pair");
  }
  if (grads) {
    grads->w1 = Eigen::MatrixXd::Zero(64, 10);
    grads->w2 = Eigen::MatrixXd::Zero(64, 64);
    grads->w3 = Eigen::MatrixXd::Zero(64, 64);
    grads->w4 = Eigen::MatrixXd::Zero(12, 64);
    grads->b1 = Eigen::VectorXd::Zero(64);
    grads->b2 = Eigen::VectorXd::Zero(64);
    grads->b3 = Eigen::VectorXd::Zero(64);
    grads->b4 = Eigen::VectorXd::Zero(12);
  }
  std::size_t total_elems = 0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    total_elems +=
        3 * (subsets ? (*subsets)[p].size() : pairs[p].first.npixels());
  }
  const double inv_m = 1.0 / static_cast<double>(total_elems);

  double loss = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const Image& render = pairs[p].first;
    const Image& query = pairs[p].second;
    if (render.width != query.width || render.height != query.height) {
      throw std::invalid_argument("act: pair image sizes differ");
    }
    const ForwardTrace t = forward_trace(net, luminance_histogram(query));
    const ColorAffine aff = affine_from_output(t.out);

    Eigen::Matrix3d d_q = Eigen::Matrix3d::Zero();
    Eigen::Vector3d d_b = Eigen::Vector3d::Zero();
    auto accumulate = [&](std::size_t i) {
      const Eigen::Vector3d c(render.r[i], render.g[i], render.b[i]);
      const Eigen::Vector3d qv(query.r[i], query.g[i], query.b[i]);
      const Eigen::Vector3d pre = aff.Q * c + aff.b;
      const Eigen::Vector3d post = pre.cwiseMax(0.0).cwiseMin(1.0);
      const Eigen::Vector3d res = post - qv;
      loss += inv_m * res.cwiseAbs().sum();
      if (grads) {
        for (int ch = 0; ch < 3; ++ch) {
          const bool interior = pre[ch] > 0.0 && pre[ch] < 1.0;
          const double sgn =
              res[ch] > 0.0 ? 1.0 : (res[ch] < 0.0 ? -1.0 : 0.0);
          const double g = interior ? inv_m * sgn : 0.0;
          d_q.row(ch) += g * c.transpose();
          d_b[ch] += g;
        }
      }
    };
    if (subsets) {
      for (std::size_t i : (*subsets)[p]) {
        accumulate(i);
      }
    } else {
      for (std::size_t i = 0; i < render.npixels(); ++i) {
        accumulate(i);
      }
    }

    if (grads) {
      Eigen::VectorXd d_out(12);
      for (int r = 0; r < 3; ++r) {
        for (int ch = 0; ch < 3; ++ch) {
          d_out[3 * r + ch] = d_q(r, ch);
        }
      }
      d_out.tail<3>() = d_b;
      grads->w4 += d_out * t.h3.transpose();
      grads->b4 += d_out;
      Eigen::VectorXd d_h3 = net.w4.transpose() * d_out;
      Eigen::VectorXd d_z3 =
          d_h3.cwiseProduct((t.z3.array() > 0.0).cast<double>().matrix());
      grads->w3 += d_z3 * t.h2.transpose();
      grads->b3 += d_z3;
      Eigen::VectorXd d_h2 = net.w3.transpose() * d_z3;
      Eigen::VectorXd d_z2 =
          d_h2.cwiseProduct((t.z2.array() > 0.0).cast<double>().matrix());
      grads->w2 += d_z2 * t.h1.transpose();
      grads->b2 += d_z2;
      Eigen::VectorXd d_h1 = net.w2.transpose() * d_z2;
      Eigen::VectorXd d_z1 =
          d_h1.cwiseProduct((t.z1.array() > 0.0).cast<double>().matrix());
      grads->w1 += d_z1 * t.x.transpose();
      grads->b1 += d_z1;
    }
  }
  return loss;
}

}  // namespace

ColorAffine act_forward(const ActNetwork& net, const LuminanceHistogram& hist) {
  return affine_from_output(forward_trace(net, hist).out);
}

double act_loss(const ActNetwork& net, const std::vector<ImagePair>& pairs) {
  return loss_and_grad(net, pairs, nullptr, nullptr);
}

ActGradients act_gradients(const ActNetwork& net,
                           const std::vector<ImagePair>& pairs,
                           double* loss_out) {
  ActGradients g;
  const double loss = loss_and_grad(net, pairs, nullptr, &g);
  if (loss_out) {
    *loss_out = loss;
  }
  return g;
}

TrainReport act_train(ActNetwork& net, const std::vector<ImagePair>& pairs,
                      int steps, double lr, std::uint64_t seed) {
  if (pairs.empty()) {
    throw std::invalid_argument("act_train: need at least one training pair");
  }
  constexpr std::size_t kPixelLimit = 4096;
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> subsets;
  subsets.reserve(pairs.size());
  for (const ImagePair& pr : pairs) {
    subsets.push_back(training_pixels(pr.first.npixels(), kPixelLimit, rng));
  }

  // Full-batch gradient descent with a backtracking line search: a step
  // is only taken when it does not increase the loss, so the trace is
  // non-increasing by construction.
  auto apply_step = [](ActNetwork& n, const ActGradients& g, double eta) {
    n.w1 -= eta * g.w1;
    n.w2 -= eta * g.w2;
    n.w3 -= eta * g.w3;
    n.w4 -= eta * g.w4;
    n.b1 -= eta * g.b1;
    n.b2 -= eta * g.b2;
    n.b3 -= eta * g.b3;
    n.b4 -= eta * g.b4;
  };

  TrainReport report;
  report.loss_trace.reserve(steps);
  double eta = lr;
  double current = loss_and_grad(net, pairs, &subsets, nullptr);
  for (int step = 0; step < steps; ++step) {
    report.loss_trace.push_back(current);
    ActGradients g;
    loss_and_grad(net, pairs, &subsets, &g);
    for (int attempt = 0; attempt < 30; ++attempt) {
      ActNetwork candidate = net;
      apply_step(candidate, g, eta);
      const double next = loss_and_grad(candidate, pairs, &subsets, nullptr);
      if (next <= current) {
        net = std::move(candidate);
        current = next;
        eta = std::min(eta * 1.3, lr * 1e4);
        break;
      }
      eta *= 0.5;
    }
  }
  return report;
}

namespace {

void dump_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g%c", m(r, c),
                    c + 1 == m.cols() ? '\n' : ' ');
      out << buf;
    }
  }
}

void read_matrix(std::istream& in, Eigen::MatrixXd& m,
                 const std::filesystem::path& path) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!(in >> m(r, c))) {
        throw std::runtime_error(path.string() + ": truncated checkpoint");
      }
    }
  }
}

}  // namespace

void save_act(const ActNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write checkpoint: " + path.string());
  }
  out << "ACT v1\n";
  out << "layers 10 64 64 64 12\n";
  dump_matrix(out, net.w1);
  dump_matrix(out, net.b1.transpose());
  dump_matrix(out, net.w2);
  dump_matrix(out, net.b2.transpose());
  dump_matrix(out, net.w3);
  dump_matrix(out, net.b3.transpose());
  dump_matrix(out, net.w4);
  dump_matrix(out, net.b4.transpose());
  if (!out) {
    throw std::runtime_error("error writing checkpoint: " + path.string());
  }
}

ActNetwork load_act(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != "ACT v1") {
    throw std::runtime_error(path.string() + ": bad checkpoint magic");
  }
  if (!std::getline(in, line) || line != "layers 10 64 64 64 12") {
    throw std::runtime_error(path.string() + ": unsupported layer layout");
  }
  ActNetwork net;
  net.w1.resize(64, 10);
  net.w2.resize(64, 64);
  net.w3.resize(64, 64);
  net.w4.resize(12, 64);
  Eigen::MatrixXd b1(1, 64), b2(1, 64), b3(1, 64), b4(1, 12);
  read_matrix(in, net.w1, path);
  read_matrix(in, b1, path);
  read_matrix(in, net.w2, path);
  read_matrix(in, b2, path);
  read_matrix(in, net.w3, path);
  read_matrix(in, b3, path);
  read_matrix(in, net.w4, path);
  read_matrix(in, b4, path);
  net.b1 = b1.transpose();
  net.b2 = b2.transpose();
  net.b3 = b3.transpose();
  net.b4 = b4.transpose();
  if (!net.w1.allFinite() || !net.w2.allFinite() || !net.w3.allFinite() ||
      !net.w4.allFinite()) {
    throw std::runtime_error(path.string() + ": non-finite parameters");
  }
  return net;
}

}  // namespace gsrefine
