#pragma once

#include <string>
#include <vector>

#include "hfw/bloch.hpp"

namespace hfw {

// lambda = gamma + i tau, optionally with transverse data reduced to
// tau~ = tau + drift_eta and lambda~ = lambda + eta^2.
struct FrequencyPoint {
  double gamma = 0.0;
  double tau = 0.0;
  double eta = 0.0;
  double drift_eta = 0.0;  // sum_j c_j eta_j

  double reduced_tau() const { return tau + drift_eta; }
  cplx reduced_lambda() const { return {gamma + eta * eta, reduced_tau()}; }
  // gamma + tau~^2 + eta^2, the target lower bound of sym(S M1).
  double weight() const { return gamma + reduced_tau() * reduced_tau() + eta * eta; }
};

struct AveragedSymbol {
  CMat m1;
  bool branch_ambiguous = false;  // a multiplier cluster sits on the cut; any branch is a valid log
};
AveragedSymbol averaged_symbol_record(const PeriodMapper& mapper, const FrequencyPoint& point);
// Throws when the branch is ambiguous.
CMat averaged_symbol(const PeriodMapper& mapper, const FrequencyPoint& point);
CMat averaged_symbol(const WaveTrain& w, const FrequencyPoint& point);

// Block Kreiss symmetrizer of a matrix without neutral spectrum:
// S = |T^{-1}|^2 T^* blockdiag(S+, -S-) T, with sym(S m) >= min |Re sigma| Id.
CMat kreiss_symmetrizer(const CMat& m, double c0);

// Neutral block of M1 near lambda = 0, in the smooth basis V(lambda) = P(lambda) V0.
struct NeutralBlockJet {
  int case_tag = 0;  // 1: simple neutral exponent, 2: Jordan pair (glancing)
  double k = 0.0;
  double omega = 0.0;
  int rank = 0;
  CMat basis0;               // V0, columns in C^{2n}
  std::vector<CMat> coeffs;  // m(lambda) = sum_j coeffs[j] lambda^j
  double radius = 0.0;
  double fit_residual = 0.0;  // max sample deviation of the fitted jet

  // Case i: m(lambda) = -lambda / c + (b / c^3) lambda^2 + ...
  double speed = 0.0;  // c, theta-frame
  double b = 0.0;

  // Case ii normal form after the rescaling that makes the (2,1) coefficient of lambda equal 1
  // and the transform that clears the (1,1) entry:
  //   m~ = [[0, 1 + b2 lambda], [lambda + c2 lambda^2 + e0 kappa lambda, d2 lambda + f kappa]].
  double c0 = 0.0;  // (2,1) coefficient of lambda before rescaling; real and positive
  cplx nb, nc, nd;  // b, c, d of the normal form
  cplx e0;
  double f = 0.0;
  double f_imag = 0.0;
  CMat n_kappa;            // d/dkappa of the rescaled block at lambda = 0
  double kappa_step = 0.0;
  double kappa_coupling_residual = 0.0;  // |Im e0 * f| * kappa_step
};

struct NeutralJetOptions {
  double radius = 1e-3;
  int order = 8;
  int samples = 32;
  double kappa_step = 1e-3;  // 0 skips the kappa stencil
};

NeutralBlockJet extract_neutral_block(const PeriodMapper& mapper, const NeutralJetOptions& opt = {});

// Neutral block m(lambda) in the jet's basis, with the frame that carries it.
struct NeutralFrame {
  SchurSplit split;
  CMat r;      // T_neutral V0
  CMat block;  // R^{-1} N R
};
NeutralFrame neutral_frame(const CMat& m1, const NeutralBlockJet& jet);

// Case i: s = -c; Re(s m) = gamma + (b/c^2)(tau^2 - gamma^2) + O(lambda^3).
double case_i_symmetrizer(const NeutralBlockJet& jet);
cplx case_i_series(const NeutralBlockJet& jet, cplx lambda);

struct CaseIISymmetrizer {
  double alpha = 0.0;
  double beta = 0.0;
  double sigma = 0.0;
  CMat s;  // [[alpha, 1 + i sigma], [1 - i sigma, beta]]
};

// Symmetrizer of the normal form at (tau, kappa).
CaseIISymmetrizer case_ii_symmetrizer(const NeutralBlockJet& jet, double tau, double kappa = 0.0);
// Transform G with m~ = G m G^{-1} / sqrt(c0) for the block m in the jet basis.
CMat normal_form_transform(const NeutralBlockJet& jet, const CMat& block);

// Hermitian symmetrizer of the neutral block in the jet basis at lambda.
CMat neutral_symmetrizer(const NeutralBlockJet& jet, const CMat& block, double tau);

struct SymmetrizerSample {
  FrequencyPoint point;
  CMat m1;
  CMat s;
  double lambda_min = 0.0;  // smallest eigenvalue of sym(S M1)
  double ratio = 0.0;       // lambda_min / weight
  double s_norm = 0.0;
  double hermitian_defect = 0.0;
  bool branch_ambiguous = false;
};

// Full S = |B|^2 B^{-*} blockdiag(S+, s, -S-) B^{-1} from the neutral frame.
SymmetrizerSample low_frequency_symmetrizer(const PeriodMapper& mapper, const NeutralBlockJet& jet,
                                            const FrequencyPoint& point);
SymmetrizerSample medium_frequency_symmetrizer(const PeriodMapper& mapper, const FrequencyPoint& point);
SymmetrizerSample evaluate_sample(const FrequencyPoint& point, const CMat& m1, const CMat& s);

struct SymmetrizerCertificate {
  double k = 0.0;
  int case_tag = 0;
  std::string regime;
  std::vector<SymmetrizerSample> samples;
  double c = 0.0;          // certified constant (2 significant digits), 0 if none
  double min_ratio = 0.0;  // min over samples of lambda_min / weight
  FrequencyPoint worst;
  double s_norm_max = 0.0;
  double hermitian_defect_max = 0.0;
  int branch_ambiguous = 0;  // samples whose multipliers sat on the cut
  bool pass = false;
};

// Pass iff lambda_min(sym(S M1)) >= c * weight at every sample.
SymmetrizerCertificate verify_certificate(const std::vector<SymmetrizerSample>& samples, double c);
// Largest c that passes, bisected to 2 significant digits; the returned certificate uses it.
SymmetrizerCertificate certify(const std::vector<SymmetrizerSample>& samples);

struct CertificateGrid {
  double radius = 10.0;  // R: low grid up to 1/R, medium grid on [1/R, R]
  int n_gamma = 12;
  int n_tau = 41;
  int n_medium_radius = 9;
  int n_medium_angle = 13;
};

std::vector<FrequencyPoint> low_frequency_grid(const CertificateGrid& grid);
std::vector<FrequencyPoint> medium_frequency_grid(const CertificateGrid& grid);

struct SymmetrizerRun {
  NeutralBlockJet jet;
  SymmetrizerCertificate low;
  SymmetrizerCertificate medium;
  SymmetrizerCertificate flipped;  // low samples with S -> -S
  bool pass() const { return low.pass && medium.pass && !flipped.pass; }
};

SymmetrizerRun certify_wavetrain(const WaveTrain& w, const CertificateGrid& grid = {});

struct HighFrequencyPoint {
  cplx lambda;
  double margin = 0.0;  // min over theta of min |Re mu|
  double bound = 0.0;   // min over theta of lambda_min(sym(S M))
  double worst_theta = 0.0;
};

struct HighFrequencyReport {
  std::vector<HighFrequencyPoint> points;
  double margin_slope = 0.0;  // log-log slope of margin against |lambda|
  double bound_spread = 0.0;  // max/min of bound / sqrt|lambda|
  bool split_ok = false;
};

HighFrequencyReport high_frequency_check(const WaveTrain& w, const std::vector<cplx>& lambdas, int n_theta = 0);

}  // namespace hfw
