#include "vertexcalc/rational.hpp"

#include <ostream>
#include <stdexcept>

namespace vertexcalc {

Rat Rat::parse(std::string_view s) {
    if (s.empty()) throw std::invalid_argument("empty rational literal");
    std::string buf(s);
    mpq_class q;
    if (q.set_str(buf, 10) != 0)
        throw std::invalid_argument("bad rational literal: '" + buf + "'");
    if (sgn(q.get_den()) == 0)
        throw std::invalid_argument("zero denominator in: '" + buf + "'");
    q.canonicalize();
    return Rat(q);
}

Rat& Rat::operator/=(const Rat& o) {
    if (o.is_zero()) throw std::domain_error("rational division by zero");
    v_ /= o.v_;
    return *this;
}

Rat Rat::inverse() const {
    if (is_zero()) throw std::domain_error("inverse of zero");
    Rat r;
    r.v_ = 1 / v_;
    return r;
}

std::string Rat::str() const {
    if (v_.get_den() == 1) return v_.get_num().get_str();
    return v_.get_str();
}

std::ostream& operator<<(std::ostream& os, const Rat& r) { return os << r.str(); }

Rat rat_pow(const Rat& base, unsigned k) {
    Rat r(1);
    for (unsigned i = 0; i < k; ++i) r *= base;
    return r;
}

Rat factorial(unsigned k) {
    mpz_class f;
    mpz_fac_ui(f.get_mpz_t(), k);
    return Rat(f);
}

}  // namespace vertexcalc
