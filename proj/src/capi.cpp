#include "qhdboot/qhdboot.h"

#include <cstdlib>
#include <cstring>
#include <span>
#include <sstream>
#include <string>

#include "qhdboot/cadlag.hpp"
#include "qhdboot/derivatives.hpp"
#include "qhdboot/error.hpp"
#include "qhdboot/functionals.hpp"
#include "qhdboot/harness.hpp"
#include "qhdboot/resampling.hpp"
#include "qhdboot/runner.hpp"

struct qhdb_step_function {
  qhdboot::StepFunction f;
};

namespace {

thread_local std::string last_error;

template <class F>
qhdb_status guard(F&& body) {
  try {
    last_error.clear();
    body();
    return QHDB_OK;
  } catch (const qhdboot::Error& e) {
    last_error = e.what();
    return static_cast<qhdb_status>(static_cast<int>(e.code()));
  } catch (const std::exception& e) {
    last_error = e.what();
    return QHDB_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown failure";
    return QHDB_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  qhdboot::require(p != nullptr, qhdboot::ErrorCode::invalid_argument,
                   std::string(what) + " must not be null");
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::span<const double> view(const double* p, std::size_t n) {
  if (n > 0) need(p, "array");
  return {p, n};
}

void copy_out(const std::vector<double>& v, double* out) {
  std::memcpy(out, v.data(), v.size() * sizeof(double));
}

}  // namespace

extern "C" {

const char* qhdb_version(void) { return QHDBOOT_VERSION; }

const char* qhdb_last_error(void) { return last_error.c_str(); }

qhdb_status qhdb_step_function_create(const double* knots, const double* values, size_t n,
                                      double value_at_minus_inf, qhdb_step_function** out) {
  return guard([&] {
    need(out, "out");
    const auto k = view(knots, n);
    const auto v = view(values, n);
    *out = new qhdb_step_function{qhdboot::StepFunction(std::vector<double>(k.begin(), k.end()),
                                                        std::vector<double>(v.begin(), v.end()),
                                                        value_at_minus_inf)};
  });
}

qhdb_status qhdb_empirical_cdf(const double* sample, size_t n, qhdb_step_function** out) {
  return guard([&] {
    need(out, "out");
    *out = new qhdb_step_function{qhdboot::empirical_cdf(view(sample, n))};
  });
}

void qhdb_step_function_destroy(qhdb_step_function* f) { delete f; }

size_t qhdb_step_function_size(const qhdb_step_function* f) { return f ? f->f.size() : 0; }

qhdb_status qhdb_step_function_eval(const qhdb_step_function* f, double x, double* out) {
  return guard([&] {
    need(f, "f");
    need(out, "out");
    *out = f->f(x);
  });
}

qhdb_status qhdb_weighted_sup_norm(const qhdb_step_function* f, double lambda, double* out) {
  return guard([&] {
    need(f, "f");
    need(out, "out");
    *out = qhdboot::weighted_sup_norm(f->f, qhdboot::WeightFunction(lambda));
  });
}

qhdb_status qhdb_avar(const qhdb_step_function* F, double alpha, double* out) {
  return guard([&] {
    need(F, "F");
    need(out, "out");
    *out = qhdboot::avar(F->f, qhdboot::AvarParams::at_level(alpha));
  });
}

qhdb_status qhdb_avar_derivative(const qhdb_step_function* F, double alpha, double kink,
                                 const qhdb_step_function* v, double* out) {
  return guard([&] {
    need(F, "F");
    need(v, "v");
    need(out, "out");
    *out = qhdboot::avar_derivative(F->f, {alpha, kink}, v->f);
  });
}

qhdb_status qhdb_exchangeable_weights(const char* scheme, size_t n, uint64_t seed, double* out) {
  return guard([&] {
    need(scheme, "scheme");
    need(out, "out");
    const auto parsed = qhdboot::parse_scheme(scheme);
    qhdboot::require(parsed != qhdboot::Scheme::blockwise, qhdboot::ErrorCode::invalid_argument,
                     "use qhdb_blockwise_weights for the blockwise scheme");
    copy_out(qhdboot::exchangeable_weights(parsed, n, seed).weights, out);
  });
}

qhdb_status qhdb_blockwise_weights(size_t n, size_t block_length, uint64_t seed, double* out) {
  return guard([&] {
    need(out, "out");
    copy_out(qhdboot::blockwise_weights(n, block_length, seed).weights, out);
  });
}

qhdb_status qhdb_blockwise_expected_weights(size_t n, size_t block_length, double* out) {
  return guard([&] {
    need(out, "out");
    copy_out(qhdboot::blockwise_expected_weights(n, block_length), out);
  });
}

qhdb_status qhdb_ks_distance(const double* a, size_t na, const double* b, size_t nb, double* out) {
  return guard([&] {
    need(out, "out");
    *out = qhdboot::ks_distance(view(a, na), view(b, nb));
  });
}

qhdb_status qhdb_wasserstein1(const double* a, size_t na, const double* b, size_t nb,
                              double* out) {
  return guard([&] {
    need(out, "out");
    *out = qhdboot::wasserstein1(view(a, na), view(b, nb));
  });
}

qhdb_status qhdb_validate_config(const char* config_path, char** diagnostics, int* has_errors) {
  return guard([&] {
    need(config_path, "config_path");
    need(diagnostics, "diagnostics");
    need(has_errors, "has_errors");
    const auto found = qhdboot::validate_config_file(config_path);
    *has_errors = qhdboot::has_errors(found) ? 1 : 0;
    *diagnostics = duplicate(qhdboot::format_diagnostics(found));
  });
}

qhdb_status qhdb_run(const char* subcommand, const char* config_path, const char* out_dir,
                     const qhdb_run_options* options, int* exit_code, char** log) {
  return guard([&] {
    need(subcommand, "subcommand");
    need(config_path, "config_path");
    need(out_dir, "out_dir");
    need(exit_code, "exit_code");
    qhdboot::RunOptions run;
    run.subcommand = subcommand;
    run.config_path = config_path;
    run.out_dir = out_dir;
    if (options) {
      run.threads = options->threads;
      if (options->has_seed) run.seed = options->seed;
      if (options->format) run.format = qhdboot::parse_format(options->format);
    }
    std::ostringstream text;
    *exit_code = qhdboot::run(run, text);
    if (log) *log = duplicate(text.str());
  });
}

void qhdb_free_string(char* s) { std::free(s); }

}  // extern "C"
