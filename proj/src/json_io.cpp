#include "dopt/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace dopt {

namespace {

std::string number(Scalar v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void append_model(std::string& out, const ModelSpec& spec) {
  out += "{\"kind\": \"";
  out += to_string(spec.kind);
  out += "\", \"factors\": ";
  out += std::to_string(spec.factors);
  out += ", \"levels\": ";
  out += std::to_string(spec.levels);
  out += ", \"row_dim\": ";
  out += std::to_string(spec.row_dim);
  out += ", \"row_count\": ";
  out += spec.row_count ? std::to_string(*spec.row_count) : "null";
  out += "}";
}

void append_design(std::string& out, const ModelSpec& spec,
                   const Design& design, Scalar ldet, const char* pad) {
  out += "{\n";
  out += pad;
  out += "  \"model\": ";
  append_model(out, spec);
  out += ",\n";
  out += pad;
  out += "  \"budget\": ";
  out += std::to_string(design.budget);
  out += ",\n";
  out += pad;
  out += "  \"support\": [";
  bool first = true;
  for (const auto& [point, mult] : design.support) {
    out += first ? "\n" : ",\n";
    first = false;
    out += pad;
    out += "    {\"levels\": [";
    for (std::size_t k = 0; k < point.size(); ++k) {
      if (k > 0) out += ", ";
      out += std::to_string(point[k]);
    }
    out += "], \"multiplicity\": ";
    out += std::to_string(mult);
    out += "}";
  }
  out += "\n";
  out += pad;
  out += "  ],\n";
  out += pad;
  out += "  \"ldet\": ";
  out += number(ldet);
  out += "\n";
  out += pad;
  out += "}";
}

ModelSpec parse_model(const nlohmann::json& j) {
  const auto kind = model_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw std::invalid_argument("unknown model kind");
  const ModelSpec spec =
      make_model_spec(*kind, j.at("factors").get<int>(), j.at("levels").get<int>());
  if (j.contains("row_dim") && j.at("row_dim").get<int>() != spec.row_dim)
    throw std::invalid_argument("row_dim does not match the model");
  return spec;
}

}  // namespace

std::string write_design(const ModelSpec& spec, const Design& design,
                         Scalar ldet) {
  std::string out;
  append_design(out, spec, design, ldet, "");
  out += "\n";
  return out;
}

std::string write_certificate(const DualCertificate& cert) {
  std::string out = "{\n  \"model\": ";
  append_model(out, cert.model);
  out += ",\n  \"s\": ";
  out += number(cert.s);
  out += ",\n  \"scope\": \"";
  out += to_string(cert.scope);
  out += "\",\n  \"tau\": ";
  out += number(cert.tau);
  out += ",\n  \"bound\": ";
  out += number(cert.upper_bound);
  out += ",\n  \"theta\": [";
  for (Index i = 0; i < cert.theta.rows(); ++i)
    for (Index j = 0; j < cert.theta.cols(); ++j) {
      if (i > 0 || j > 0) out += ", ";
      out += number(cert.theta(i, j));
    }
  out += "]\n}\n";
  return out;
}

std::string write_search_report(const ModelSpec& spec,
                                const SearchResult& result) {
  std::string out = "{\n  \"model\": ";
  append_model(out, spec);
  out += ",\n  \"n\": ";
  out += spec.row_count ? std::to_string(*spec.row_count) : "null";
  out += ",\n  \"m\": ";
  out += std::to_string(spec.row_dim);
  out += ",\n  \"initial_ldet\": ";
  out += number(result.trace.initial_ldet);
  out += ",\n  \"steps\": ";
  out += std::to_string(result.trace.steps.size());
  out += ",\n  \"skipped_singular\": ";
  out += std::to_string(result.trace.skipped_singular);
  out += ",\n  \"design\": ";
  append_design(out, spec, result.design, result.ldet, "  ");
  out += "\n}\n";
  return out;
}

std::string write_bound_report(const ModelSpec& spec, const BoundReport& report) {
  std::string out = "{\n  \"model\": ";
  append_model(out, spec);
  out += ",\n  \"s\": ";
  out += number(report.certificate.s);
  out += ",\n  \"bound\": ";
  out += number(report.bound);
  out += ",\n  \"relax_value\": ";
  out += number(report.relax_value);
  out += ",\n  \"rounds\": ";
  out += std::to_string(report.rounds);
  out += ",\n  \"pool_size\": ";
  out += std::to_string(report.pool_size_final);
  out += ",\n  \"converged\": ";
  out += report.converged ? "true" : "false";
  out += ",\n  \"kw_gap\": ";
  out += number(report.kw_gap_final);
  out += ",\n  \"certificate\": ";
  {
    std::string cert = write_certificate(report.certificate);
    // re-indent the nested document by one level
    std::string indented;
    for (std::size_t i = 0; i < cert.size(); ++i) {
      indented += cert[i];
      if (cert[i] == '\n' && i + 1 < cert.size()) indented += "  ";
    }
    while (!indented.empty() &&
           (indented.back() == '\n' || indented.back() == ' '))
      indented.pop_back();
    out += indented;
  }
  out += "\n}\n";
  return out;
}

std::string write_solve_report(const ModelSpec& spec, const BnbResult& result) {
  std::string out = "{\n  \"model\": ";
  append_model(out, spec);
  out += ",\n  \"design\": ";
  append_design(out, spec, result.design, result.proof.optimal_ldet, "  ");
  out += ",\n  \"proof\": {\n    \"optimal_ldet\": ";
  out += number(result.proof.optimal_ldet);
  out += ",\n    \"nodes_explored\": ";
  out += std::to_string(result.proof.nodes_explored);
  out += ",\n    \"final_gap\": ";
  out += number(result.proof.final_gap);
  out += ",\n    \"proven\": ";
  out += result.proof.proven ? "true" : "false";
  out += "\n  }\n}\n";
  return out;
}

DesignDocument read_design(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  // Search and solve reports embed their design; accept either document.
  if (j.contains("design")) {
    j = j.at("design");
  }
  DesignDocument doc;
  doc.model = parse_model(j.at("model"));
  doc.design.budget = j.at("budget").get<std::int64_t>();
  for (const auto& entry : j.at("support")) {
    FactorPoint point;
    for (const auto& level : entry.at("levels"))
      point.push_back(level.get<Level>());
    if (!point_in_range(doc.model, point))
      throw std::invalid_argument("support point outside the factor grid");
    const auto mult = entry.at("multiplicity").get<std::int64_t>();
    if (mult <= 0) throw std::invalid_argument("multiplicity must be positive");
    if (!doc.design.support.emplace(point, mult).second)
      throw std::invalid_argument("duplicate support point");
  }
  if (!doc.design.valid())
    throw std::invalid_argument("multiplicities do not sum to the budget");
  doc.ldet = j.at("ldet").get<Scalar>();
  return doc;
}

DualCertificate read_certificate(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  // A bound report embeds its certificate; accept either document.
  if (j.contains("certificate")) {
    j = j.at("certificate");
  }
  DualCertificate cert;
  cert.model = parse_model(j.at("model"));
  cert.s = j.at("s").get<Scalar>();
  const std::string scope = j.at("scope").get<std::string>();
  if (scope == "pool")
    cert.scope = CertScope::pool;
  else if (scope == "full")
    cert.scope = CertScope::full;
  else
    throw std::invalid_argument("unknown certificate scope");
  cert.tau = j.at("tau").get<Scalar>();
  cert.upper_bound = j.at("bound").get<Scalar>();
  const auto& theta = j.at("theta");
  const Index m = cert.model.row_dim;
  if (static_cast<Index>(theta.size()) != m * m)
    throw std::invalid_argument("theta has the wrong size");
  cert.theta.resize(m, m);
  Index k = 0;
  for (const auto& value : theta) {
    cert.theta(k / m, k % m) = value.get<Scalar>();
    ++k;
  }
  Eigen::LLT<Matrix> llt((cert.theta + cert.theta.transpose()) / 2);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("theta is not positive definite");
  cert.base_ldet = -2 * llt.matrixLLT().diagonal().array().log().sum();
  return cert;
}

}  // namespace dopt
