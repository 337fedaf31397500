#include "dopt/commands.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dopt/branch_bound.hpp"
#include "dopt/info_matrix.hpp"
#include "dopt/json_io.hpp"
#include "dopt/local_search.hpp"
#include "dopt/model.hpp"
#include "dopt/pricing.hpp"
#include "dopt/reference.hpp"
#include "dopt/relaxation.hpp"

namespace dopt {
namespace {

ModelSpec spec_from_args(const CommonArgs& args) {
  const auto kind = model_kind_from_string(args.model);
  if (!kind) {
    throw std::invalid_argument("unknown model kind: " + args.model);
  }
  return make_model_spec(*kind, args.factors, args.levels);
}

SearchOptions search_options(const CommonArgs& args) {
  SearchOptions opts;
  opts.eps_imp = args.eps_imp;
  opts.threads = args.threads;
  opts.seed = args.seed;
  opts.price.threads = args.threads;
  return opts;
}

RowGenOptions rowgen_options(const CommonArgs& args) {
  RowGenOptions opts;
  opts.relax.eps_kw = args.eps_kw;
  opts.price.top_k = args.topk;
  opts.price.threads = args.threads;
  opts.max_rounds = args.rounds;
  return opts;
}

std::string read_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw std::invalid_argument("cannot read file: " + path);
  }
  std::ostringstream text;
  text << file.rdbuf();
  return text.str();
}

// Deterministic positive semidefinite matrix for the self-check battery.
Matrix random_psd(Index dim, std::mt19937_64& rng) {
  std::normal_distribution<Scalar> gauss(0.0, 1.0);
  Matrix g(dim, dim);
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j < dim; ++j) {
      g(i, j) = gauss(rng);
    }
  }
  return Matrix(g * g.transpose() / static_cast<Scalar>(dim));
}

struct CheckLog {
  std::ostringstream lines;
  int failures = 0;

  void ok(const std::string& what) { lines << "[ok] " << what << "\n"; }
  void fail(const std::string& what) {
    lines << "[FAIL] " << what << "\n";
    ++failures;
  }
};

std::string point_string(const FactorPoint& point) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < point.size(); ++i) {
    out << (i ? "," : "") << point[i];
  }
  out << ")";
  return out.str();
}

int verify_certificate_file(const VerifyArgs& args, std::string& output) {
  const DualCertificate cert = read_certificate(read_file(args.certificate_file));
  CheckLog log;
  if (cert.scope != CertScope::full) {
    throw std::invalid_argument(
        "certificate covers only its pool; only full-scope certificates can "
        "be checked against the whole grid");
  }
  const ModelSpec& spec = cert.model;
  const Matrix rows = materialize_dense(spec, 100'000);
  const Index n = rows.rows();
  const Scalar slack = 1e-8;
  Index violated = 0;
  for (Index i = 0; i < n; ++i) {
    const Vector v = rows.row(i).transpose();
    const Scalar q = v.dot(cert.theta * v);
    if (q > cert.tau + slack) {
      if (violated == 0) {
        const FactorPoint point =
            decode_point(spec, static_cast<std::uint64_t>(i));
        std::ostringstream msg;
        msg << "dual constraint violated at row " << i << " "
            << point_string(point) << ": v'Tv = " << q << " > tau = "
            << cert.tau;
        log.fail(msg.str());
      }
      ++violated;
    }
  }
  if (violated == 0) {
    std::ostringstream msg;
    msg << "all " << n << " dual constraints hold (tau = " << cert.tau << ")";
    log.ok(msg.str());
  } else if (violated > 1) {
    std::ostringstream msg;
    msg << violated << " of " << n << " dual constraints violated in total";
    log.fail(msg.str());
  }

  const Scalar expected =
      cert.base_ldet + cert.tau * cert.s - static_cast<Scalar>(spec.row_dim);
  if (std::abs(cert.upper_bound - expected) <=
      1e-9 * std::max<Scalar>(1, std::abs(expected))) {
    log.ok("bound matches ldet(theta^-1) + tau*s - m");
  } else {
    std::ostringstream msg;
    msg << "bound " << cert.upper_bound << " does not match "
        << "ldet(theta^-1) + tau*s - m = " << expected;
    log.fail(msg.str());
  }
  output = log.lines.str();
  return log.failures ? kExitVerifyFailed : kExitOk;
}

int verify_design_file(const VerifyArgs& args, std::string& output) {
  const DesignDocument doc = read_design(read_file(args.design_file));
  CheckLog log;
  const DesignRows rows = design_rows(doc.model, doc.design);
  InfoMatrix info = build_info(rows.rows, rows.mults);
  const Scalar ldet = info.ldet();
  if (std::abs(ldet - doc.ldet) <= 1e-8 * std::max<Scalar>(1, std::abs(ldet))) {
    std::ostringstream msg;
    msg << "stored ldet matches the support (ldet = " << ldet << ", s = "
        << doc.design.budget << ", support points = "
        << doc.design.support.size() << ")";
    log.ok(msg.str());
  } else {
    std::ostringstream msg;
    msg << "stored ldet " << doc.ldet << " disagrees with recomputed " << ldet;
    log.fail(msg.str());
  }
  output = log.lines.str();
  return log.failures ? kExitVerifyFailed : kExitOk;
}

int verify_instance(const CommonArgs& args, std::string& output) {
  const ModelSpec spec = spec_from_args(args);
  const std::int64_t s =
      args.budget > 0 ? args.budget : static_cast<std::int64_t>(spec.row_dim) + 2;
  CheckLog log;
  std::mt19937_64 rng(args.seed);

  // Oracle vs dense scan on random curvature matrices.
  {
    PriceOptions popts;
    popts.threads = args.threads;
    int bad = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix q = random_psd(spec.row_dim, rng);
      const PricingResult fast = price(spec, q, popts);
      const PricingResult slow = brute_force_price(spec, q);
      const Scalar tol =
          1e-9 * std::max<Scalar>(1, std::abs(slow.best_value));
      if (fast.best_point != slow.best_point ||
          std::abs(fast.best_value - slow.best_value) > tol) {
        if (bad == 0) {
          std::ostringstream msg;
          msg << "pricing trial " << trial << ": oracle picked "
              << point_string(fast.best_point) << " (" << fast.best_value
              << "), dense scan picked " << point_string(slow.best_point)
              << " (" << slow.best_value << ")";
          log.fail(msg.str());
        }
        ++bad;
      }
    }
    if (bad == 0) {
      log.ok("pricing oracle matches the dense scan on 20 random objectives");
    }
  }

  // Local search against the exhaustive optimum where enumerable.
  SearchOptions sopts = search_options(args);
  const SearchResult search = local_search(spec, s, sopts);
  {
    const BruteForceResult brute = brute_force_optimum(spec, s);
    if (!brute.found) {
      log.fail("every size-s design is singular, nothing to compare");
    } else if (search.ldet >=
               brute.ldet - 1e-6 * std::max<Scalar>(1, std::abs(brute.ldet))) {
      std::ostringstream msg;
      msg << "local search reaches the exhaustive optimum (ldet = "
          << brute.ldet << ")";
      log.ok(msg.str());
    } else {
      const ExchangeCheck check =
          verify_local_optimum(spec, search.design, args.eps_imp);
      if (check.locally_optimal) {
        std::ostringstream msg;
        msg << "local search stopped at a genuine local optimum ("
            << search.ldet << " vs global " << brute.ldet << ")";
        log.ok(msg.str());
      } else {
        std::ostringstream msg;
        msg << "local search missed exchange " << point_string(check.leave)
            << " -> " << point_string(check.enter) << " worth "
            << check.best_delta;
        log.fail(msg.str());
      }
    }
  }

  // Row-generation bound against the dense relaxation, plus the sandwich.
  RowGenOptions ropts = rowgen_options(args);
  ropts.relax.eps_kw = 1e-8;
  const BoundReport report = natural_bound_rowgen(spec, s, ropts);
  {
    const RelaxSolution dense = dense_relaxation(spec, s);
    if (std::abs(report.bound - dense.ldet_value) <=
        1e-5 * std::max<Scalar>(1, std::abs(dense.ldet_value))) {
      std::ostringstream msg;
      msg << "row-generation bound matches the dense relaxation ("
          << report.bound << " vs " << dense.ldet_value << ")";
      log.ok(msg.str());
    } else {
      std::ostringstream msg;
      msg << "row-generation bound " << report.bound
          << " drifts from the dense relaxation " << dense.ldet_value;
      log.fail(msg.str());
    }
    if (search.ldet <= report.bound + 1e-6) {
      log.ok("integer ldet sits below the relaxation bound");
    } else {
      std::ostringstream msg;
      msg << "integer ldet " << search.ldet << " exceeds the bound "
          << report.bound;
      log.fail(msg.str());
    }
  }

  // The emitted certificate must be dual feasible over the whole grid.
  {
    const DualCertificate& cert = report.certificate;
    const Matrix rows = materialize_dense(spec, 100'000);
    Index violated = 0;
    for (Index i = 0; i < rows.rows(); ++i) {
      const Vector v = rows.row(i).transpose();
      if (v.dot(cert.theta * v) > cert.tau + 1e-8) {
        ++violated;
      }
    }
    if (violated == 0) {
      log.ok("certificate is dual feasible over all rows");
    } else {
      std::ostringstream msg;
      msg << "certificate violates " << violated << " dual constraints";
      log.fail(msg.str());
    }
  }

  output = log.lines.str();
  return log.failures ? kExitVerifyFailed : kExitOk;
}

template <typename Fn>
int guarded(Fn&& fn, std::string& error) {
  try {
    return fn();
  } catch (const InfeasibleError& e) {
    error = e.what();
    return kExitInfeasible;
  } catch (const CapacityError& e) {
    error = e.what();
    return kExitBadInput;
  } catch (const std::exception& e) {
    error = e.what();
    return kExitBadInput;
  }
}

}  // namespace

int run_local_search(const CommonArgs& args, std::string& output,
                     std::string& error) {
  return guarded(
      [&] {
        const ModelSpec spec = spec_from_args(args);
        const SearchResult result =
            local_search(spec, args.budget, search_options(args));
        output = write_search_report(spec, result);
        return kExitOk;
      },
      error);
}

int run_bound(const CommonArgs& args, std::string& output, std::string& error) {
  return guarded(
      [&] {
        const ModelSpec spec = spec_from_args(args);
        const BoundReport report =
            natural_bound_rowgen(spec, args.budget, rowgen_options(args));
        output = write_bound_report(spec, report);
        return kExitOk;
      },
      error);
}

int run_solve(const CommonArgs& args, std::string& output, std::string& error) {
  return guarded(
      [&] {
        const ModelSpec spec = spec_from_args(args);
        BnbOptions opts;
        opts.node_cap = args.node_cap;
        opts.time_cap_seconds = args.time_cap;
        opts.rowgen = rowgen_options(args);
        opts.search = search_options(args);
        const BnbResult result = solve_exact(spec, args.budget, opts);
        output = write_solve_report(spec, result);
        return result.proof.proven ? kExitOk : kExitUnproven;
      },
      error);
}

int run_verify(const VerifyArgs& args, std::string& output, std::string& error) {
  return guarded(
      [&] {
        if (!args.certificate_file.empty()) {
          return verify_certificate_file(args, output);
        }
        if (!args.design_file.empty()) {
          return verify_design_file(args, output);
        }
        return verify_instance(args.common, output);
      },
      error);
}

}  // namespace dopt
