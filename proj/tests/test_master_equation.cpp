#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cbu/master_equation.hpp"
#include "cbu/models.hpp"
#include "oracles.hpp"

using namespace cbu;

namespace {

ComplexMatrix random_density(Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  ComplexMatrix a(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) a(i, j) = Complex(n(rng), n(rng));
  ComplexMatrix rho = a * a.adjoint();
  return rho / rho.trace();
}

oracle::GeneratorAt oracle_generator(const CanonicalMasterEquation& me) {
  return [me](double t) {
    std::vector<oracle::Term> terms;
    for (std::size_t l = 0; l < me.num_channels(); ++l) terms.push_back({me.op(l, t), me.rate(l, t)});
    return oracle::generator(me.hamiltonian(t), terms);
  };
}

}  // namespace

TEST_CASE("Gell-Mann basis is traceless, orthonormal and POVM complete for d = 2..6") {
  for (Index d = 2; d <= 6; ++d) {
    const auto basis = gell_mann_basis(d);
    REQUIRE(basis.size() == static_cast<std::size_t>(d * d - 1));
    ComplexMatrix povm = ComplexMatrix::Zero(d, d);
    double worst_ortho = 0.0, worst_trace = 0.0;
    for (std::size_t a = 0; a < basis.size(); ++a) {
      worst_trace = std::max(worst_trace, std::abs(basis[a].trace()));
      for (std::size_t b = 0; b < basis.size(); ++b) {
        const Complex ip = (basis[a].adjoint() * basis[b]).trace();
        worst_ortho = std::max(worst_ortho, std::abs(ip - (a == b ? 1.0 : 0.0)));
      }
      povm += basis[a].adjoint() * basis[a];
    }
    const double g = static_cast<double>(d * d - 1) / static_cast<double>(d);
    CHECK(worst_trace < 1e-12);
    CHECK(worst_ortho < 1e-12);
    CHECK(max_abs(povm - g * ComplexMatrix::Identity(d, d)) <= 1e-12);
  }
}

TEST_CASE("Gell-Mann basis for d = 2 and d = 3 spans the textbook matrices") {
  // Every textbook generator / sqrt(2) has unit projection onto the span.
  for (int k = 1; k <= 3; ++k) {
    const ComplexMatrix ref = oracle::pauli(k) / std::sqrt(2.0);
    double weight = 0.0;
    for (const auto& b : gell_mann_basis(2)) weight += std::norm((b.adjoint() * ref).trace());
    CHECK(weight == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (const auto& g : oracle::gell_mann3()) {
    const ComplexMatrix ref = g / std::sqrt(2.0);
    double weight = 0.0;
    for (const auto& b : gell_mann_basis(3)) weight += std::norm((b.adjoint() * ref).trace());
    CHECK(weight == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sum over the completed basis reproduces the trace") {
  // sum_B B rho B^dagger over an orthonormal basis of all d x d matrices is Tr(rho) 1.
  std::mt19937_64 rng(11);
  for (Index d : {2, 3, 4}) {
    const ComplexMatrix rho = random_density(d, rng);
    ComplexMatrix acc = rho / static_cast<double>(d);  // identity / sqrt(d) term
    for (const auto& b : gell_mann_basis(d)) acc += b * rho * b.adjoint();
    CHECK(max_abs(acc - ComplexMatrix::Identity(d, d)) < 1e-12);
  }
}

TEST_CASE("validation of canonical and non-canonical equations") {
  const auto grid = TimeGrid{0.0, 1.0, 0.1}.times();
  const auto canon = models::negative_rate_qubit();
  const ValidationReport r = validate_canonical(canon, grid);
  CHECK(r.passes());
  CHECK(r.canonical_structure());
  CHECK(canon.povm_constant() == doctest::Approx(1.5));

  const auto thermal = models::thermal_qubit();
  const ValidationReport rt = validate_canonical(thermal, grid);
  CHECK(rt.passes());
  CHECK(rt.povm_ok());
  CHECK_FALSE(rt.canonical_structure());

  const auto decay = models::single_decay_qubit();
  CHECK_FALSE(validate_canonical(decay, grid).povm_ok());

  // Non-Hermitian Hamiltonian.
  const auto bad = CanonicalMasterEquation(2, constant_matrix(pauli::sigma_plus()),
                                           canon.channels(), canon.povm_constant(), true);
  const ValidationReport rb = validate_canonical(bad, grid);
  CHECK_FALSE(rb.hamiltonian_ok());
  CHECK_FALSE(rb.passes());
  CHECK(rb.summary().find("verdict=fail") != std::string::npos);
}

TEST_CASE("time grid") {
  const TimeGrid g{0.0, 1.0, 1e-3};
  CHECK(g.steps() == 1000);
  CHECK(g.time(g.steps()) == 1.0);
  CHECK(g.times().size() == 1001);

  const TimeGrid odd{0.0, 1.0, 0.3};
  CHECK(odd.steps() == 4);
  CHECK(odd.step() == doctest::Approx(0.25));
  CHECK(odd.step() <= 0.3);
}

TEST_CASE("generator matrix matches the entrywise oracle") {
  const auto me = models::negative_rate_qubit();
  const auto gen = oracle_generator(me);
  for (double t : {0.0, 0.37, 1.2}) CHECK(max_abs(generator_matrix(me, t) - gen(t)) < 1e-13);
  const auto th = models::thermal_qubit();
  const auto gth = oracle_generator(th);
  CHECK(max_abs(generator_matrix(th, 0.4) - gth(0.4)) < 1e-13);
}

TEST_CASE("RK4 density integration agrees with a product-of-exponentials oracle") {
  std::mt19937_64 rng(12);
  for (const auto& me : {models::negative_rate_qubit(), models::thermal_qubit()}) {
    const ComplexMatrix rho0 = random_density(2, rng);
    const auto s = integrate_density(me, rho0, 0.0, 1.0, 1e-3);
    const ComplexMatrix ref = oracle::evolve(oracle_generator(me), rho0, 0.0, 1.0, 4000);
    CHECK(oracle::hs(s.states.back() - ref) < 1e-8);
    CHECK(std::abs(s.states.back().trace() - 1.0) < 1e-12);
    CHECK(max_abs(s.states.back() - s.states.back().adjoint()) < 1e-12);
  }
}

TEST_CASE("integration records first and last points with a stride") {
  const auto me = models::negative_rate_qubit();
  const auto s = integrate_density(me, models::excited_state(), 0.0, 1.0, 1e-3, 300);
  REQUIRE(s.times.size() == 5);
  CHECK(s.times.front() == 0.0);
  CHECK(s.times[1] == doctest::Approx(0.3));
  CHECK(s.times.back() == 1.0);
}

TEST_CASE("zero rates and zero Hamiltonian leave the state constant") {
  const auto me = make_canonical(2, constant_matrix(ComplexMatrix::Zero(2, 2)),
                                 {constant_rate(0.0), constant_rate(0.0), constant_rate(0.0)});
  std::mt19937_64 rng(13);
  const ComplexMatrix rho0 = random_density(2, rng);
  const auto s = integrate_density(me, rho0, 0.0, 2.0, 1e-2, 10);
  for (const auto& r : s.states) CHECK(max_abs(r - rho0) == 0.0);
}

TEST_CASE("unitary evolution with zero rates") {
  const ComplexMatrix H = pauli::sigma1();
  const auto me = make_canonical(2, constant_matrix(H), {constant_rate(0.0), constant_rate(0.0), constant_rate(0.0)});
  const ComplexMatrix rho0 = models::excited_state();
  const auto s = integrate_density(me, rho0, 0.0, 1.0, 1e-3);
  const ComplexMatrix U = (Complex(0.0, -1.0) * H).exp();
  CHECK(max_abs(s.states.back() - U * rho0 * U.adjoint()) < 1e-10);
}

TEST_CASE("non-finite rates raise a numerical error") {
  const auto me = make_canonical(
      2, constant_matrix(ComplexMatrix::Zero(2, 2)),
      {constant_rate(0.1), constant_rate(0.1),
       [](double t) { return t > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 0.1; }});
  CHECK_THROWS_AS(integrate_density(me, models::excited_state(), 0.0, 1.0, 1e-2), NumericalError);
}

TEST_CASE("propagator matches the oracle and composes") {
  const auto me = models::thermal_qubit();
  const Superoperator p = propagator(me, 0.0, 1.0, 1e-3);
  const auto ref = oracle::flow(oracle_generator(me), 0.0, 1.0, 4000);
  CHECK(max_abs(p.matrix - ref) < 1e-8);

  const Superoperator a = propagator(me, 0.0, 0.4, 1e-3);
  const Superoperator b = propagator(me, 0.4, 1.0, 1e-3);
  CHECK(max_abs((b * a).matrix - p.matrix) <= 1e-8);
}

TEST_CASE("optimal shift and minimum isotropic noise") {
  const auto me = models::negative_rate_qubit();
  for (double t : {0.0, 0.5, 1.3}) {
    const double w3 = -0.3 + 0.1 * std::sin(2.0 * t);
    CHECK(optimal_c(me, t) == doctest::Approx(-2.0 * w3));
    CHECK(min_isotropic_noise(me, t) == doctest::Approx(-2.0 * w3));  // d = 2
  }
  const auto pos = make_canonical(3, constant_matrix(ComplexMatrix::Zero(3, 3)),
                                  std::vector<RateProfile>(8, constant_rate(0.2)));
  CHECK(optimal_c(pos, 0.0) == 0.0);
  CHECK(min_isotropic_noise(pos, 0.0) == 0.0);

  std::vector<RateProfile> rates(8, constant_rate(0.5));
  rates[4] = constant_rate(-0.1);
  const auto q = make_canonical(3, constant_matrix(ComplexMatrix::Zero(3, 3)), rates);
  CHECK(min_isotropic_noise(q, 0.0) == doctest::Approx(0.3));
  CHECK(min_isotropic_noise(q, 0.0) == doctest::Approx(1.5 * optimal_c(q, 0.0)));
}

TEST_CASE("pairing shifts every rate by c and rejects insufficient shifts") {
  const auto me = models::negative_rate_qubit();
  const auto grid = TimeGrid{0.0, 1.0, 1e-2}.times();
  const PairedEquations p = pair_optimal(me, grid);
  for (double t : grid) {
    for (std::size_t l = 0; l < 3; ++l) {
      CHECK(p.paired_cp.rate(l, t) == doctest::Approx(me.rate(l, t) + p.shift(t)));
      CHECK(p.paired_cp.rate(l, t) >= 0.0);
    }
  }
  CHECK_THROWS_AS(pair(me, constant_rate(0.1), grid), std::invalid_argument);
  CHECK_THROWS_AS(pair(me, constant_rate(-0.1), grid), std::invalid_argument);
  CHECK_NOTHROW(pair(me, constant_rate(1.0), grid));
}

TEST_CASE("paired generator differs by c (Tr(rho) 1 - d rho) for canonical operators") {
  // Property: sum_l D_{L_l}(rho) = Tr(rho) 1 - d rho over a Gell-Mann basis.
  std::mt19937_64 rng(14);
  for (Index d : {2, 3}) {
    std::vector<RateProfile> rates;
    for (Index l = 0; l < d * d - 1; ++l) rates.push_back(constant_rate(l % 2 ? -0.2 : 0.3));
    const auto me = make_canonical(d, constant_matrix(ComplexMatrix::Zero(d, d)), rates);
    const PairedEquations p = pair(me, constant_rate(0.7), {0.0});
    const ComplexMatrix rho = random_density(d, rng);
    const ComplexMatrix diff = p.paired_cp.rhs(0.0, rho) - me.rhs(0.0, rho);
    const ComplexMatrix expected =
        0.7 * (rho.trace() * ComplexMatrix::Identity(d, d) - static_cast<double>(d) * rho);
    CHECK(max_abs(diff - expected) < 1e-12);
  }
}

TEST_CASE("SPA deformed step") {
  const auto me = models::negative_rate_qubit();
  const double t = 0.3, dt = 1e-3;
  const Superoperator g = generator_superoperator(me, t);
  const Superoperator plain = spa_deformed_step(me, t, dt, 0.0);
  CHECK(max_abs(plain.matrix - (ComplexMatrix::Identity(4, 4) + dt * g.matrix)) < 1e-15);

  std::mt19937_64 rng(15);
  const ComplexMatrix rho = random_density(2, rng);
  const double n = 0.4;
  const ComplexMatrix direct = (1.0 - dt * n) * (rho + dt * me.rhs(t, rho)) +
                               dt * n * rho.trace() * ComplexMatrix::Identity(2, 2) / 2.0;
  CHECK(max_abs(spa_deformed_step(me, t, dt, n).apply(rho) - direct) < 1e-14);

  CHECK_THROWS(spa_deformed_step(me, t, 0.5, 0.0));
}

TEST_CASE("shift transform leaves the generator unchanged") {
  const auto me = models::negative_rate_qubit();
  std::vector<std::function<Complex(double)>> shifts{
      [](double) { return Complex(0.3, -0.2); },
      [](double t) { return Complex(std::cos(t), 0.1); },
      [](double) { return Complex(0.0, 0.0); }};
  const auto shifted = shift_transform(me, shifts);
  CHECK_FALSE(shifted.canonical());
  for (double t : {0.0, 0.7}) {
    CHECK(max_abs(generator_matrix(shifted, t) - generator_matrix(me, t)) < 1e-12);
    CHECK(max_abs(shifted.op(0, t) - me.op(0, t) - Complex(0.3, -0.2) * ComplexMatrix::Identity(2, 2)) <
          1e-15);
  }
}
