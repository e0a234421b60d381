#include "vertexcalc/formal.hpp"

#include <algorithm>
#include <functional>
#include <mutex>
#include <sstream>

#include "vertexcalc/errors.hpp"

namespace vertexcalc {

// ---------------------------------------------------------------------------
// Var interning

namespace {
struct VarTable {
    std::mutex mu;
    std::vector<std::string> names;
    std::map<std::string, int> ids;
};
VarTable& var_table() {
    static VarTable t;
    return t;
}
}  // namespace

Var Var::intern(const std::string& name) {
    auto& t = var_table();
    std::lock_guard<std::mutex> lock(t.mu);
    auto it = t.ids.find(name);
    if (it != t.ids.end()) return Var(it->second);
    int id = static_cast<int>(t.names.size());
    t.names.push_back(name);
    t.ids.emplace(name, id);
    return Var(id);
}

const std::string& Var::name() const {
    auto& t = var_table();
    std::lock_guard<std::mutex> lock(t.mu);
    return t.names.at(id_);
}

long sat_add(long a, long b) {
    bool apos = a >= kInf, aneg = a <= -kInf, bpos = b >= kInf, bneg = b <= -kInf;
    if ((apos && bneg) || (aneg && bpos))
        fail(ErrCode::Internal, "indeterminate infinite bound arithmetic");
    if (apos || bpos) return kInf;
    if (aneg || bneg) return -kInf;
    long s = a + b;
    if (s >= kInf) return kInf;
    if (s <= -kInf) return -kInf;
    return s;
}

namespace {
Interval iv_minus(const Interval& a, const Interval& b) {
    return {sat_add(a.lo, -b.hi), sat_add(a.hi, -b.lo)};
}
Rat sgn_pow(int sign, long e) {
    if (sign >= 0) return Rat(1);
    return (e % 2 == 0) ? Rat(1) : Rat(-1);
}
}  // namespace

// ---------------------------------------------------------------------------
// ExpWindow

ExpWindow& ExpWindow::set(Var v, long lo, long hi) { return set(v, Interval{lo, hi}); }

ExpWindow& ExpWindow::set(Var v, Interval iv) {
    if (iv.lo <= -kInf || iv.hi >= kInf) fail(ErrCode::Schema, "exponent window must be finite");
    for (auto& [w, old] : ent_)
        if (w == v) {
            old = iv;
            return *this;
        }
    ent_.emplace_back(v, iv);
    std::sort(ent_.begin(), ent_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return *this;
}

ExpWindow ExpWindow::cube(std::initializer_list<Var> vars, long r) {
    ExpWindow w;
    for (Var v : vars) w.set(v, -r, r);
    return w;
}

bool ExpWindow::has(Var v) const {
    for (const auto& [w, iv] : ent_)
        if (w == v) return true;
    return false;
}

Interval ExpWindow::get(Var v) const {
    for (const auto& [w, iv] : ent_)
        if (w == v) return iv;
    fail(ErrCode::Internal, "variable " + v.name() + " absent from window");
}

std::string ExpWindow::str() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < ent_.size(); ++i) {
        if (i) os << ",";
        os << ent_[i].first.name() << "=" << ent_[i].second.lo << ":" << ent_[i].second.hi;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Coefficients

void OpCoeff::normalize() {
    for (auto it = cols.begin(); it != cols.end();)
        it = it->second.is_zero() ? cols.erase(it) : std::next(it);
}

bool coeff_is_zero(const Coeff& c) {
    if (auto* r = std::get_if<Rat>(&c)) return r->is_zero();
    if (auto* v = std::get_if<SparseVector>(&c)) return v->is_zero();
    return std::get<OpCoeff>(c).is_zero();
}

void coeff_accumulate(Coeff& into, const Rat& scale, const Coeff& c) {
    if (into.index() != c.index()) fail(ErrCode::Internal, "coefficient kind mismatch in sum");
    if (auto* r = std::get_if<Rat>(&into)) {
        *r += scale * std::get<Rat>(c);
    } else if (auto* v = std::get_if<SparseVector>(&into)) {
        v->axpy(scale, std::get<SparseVector>(c));
    } else {
        auto& m = std::get<OpCoeff>(into);
        for (const auto& [j, col] : std::get<OpCoeff>(c).cols) m.cols[j].axpy(scale, col);
        m.normalize();
    }
}

std::string coeff_str(const Coeff& c) {
    if (auto* r = std::get_if<Rat>(&c)) return r->str();
    if (auto* v = std::get_if<SparseVector>(&c)) return v->str();
    std::ostringstream os;
    os << "op{";
    bool first = true;
    for (const auto& [j, col] : std::get<OpCoeff>(c).cols) {
        if (!first) os << ", ";
        os << j << "->" << col.str();
        first = false;
    }
    os << "}";
    return os.str();
}

std::string SpaceSig::str() const {
    switch (kind) {
        case Kind::Scalar: return "scalar";
        case Kind::Vec: return "vec(" + (dst ? dst->label() : "?") + ")";
        case Kind::Op:
            return "op(" + (src ? src->label() : "?") + "->" + (dst ? dst->label() : "?") + ")";
    }
    return "?";
}

namespace {

// Left-to-right composition: scalars scale, operators apply/compose.
SpaceSig compose_sig(const SpaceSig& a, const SpaceSig& b) {
    using K = SpaceSig::Kind;
    if (a.kind == K::Scalar) return b;
    if (b.kind == K::Scalar) return a;
    if (a.kind == K::Op && b.kind == K::Vec) {
        if (a.src != b.dst) fail(ErrCode::IllDefinedProduct, "operator/vector space mismatch");
        return SpaceSig::vec(a.dst);
    }
    if (a.kind == K::Op && b.kind == K::Op) {
        if (a.src != b.dst) fail(ErrCode::IllDefinedProduct, "operator composition space mismatch");
        return SpaceSig::op(b.src, a.dst);
    }
    fail(ErrCode::IllDefinedProduct,
         "coefficient spaces do not compose: " + a.str() + " * " + b.str());
}

Coeff compose_coeff(const Coeff& a, const Coeff& b, const SpaceSig& siga, const SpaceSig& sigb) {
    using K = SpaceSig::Kind;
    if (siga.kind == K::Scalar) {
        const Rat& s = std::get<Rat>(a);
        Coeff out = b;
        if (auto* r = std::get_if<Rat>(&out)) *r *= s;
        else if (auto* v = std::get_if<SparseVector>(&out)) v->scale(s);
        else
            for (auto& [j, col] : std::get<OpCoeff>(out).cols) col.scale(s);
        return out;
    }
    if (sigb.kind == K::Scalar) return compose_coeff(b, a, sigb, siga);
    const auto& am = std::get<OpCoeff>(a);
    if (sigb.kind == K::Vec) {
        const auto& bv = std::get<SparseVector>(b);
        VecBuilder out;
        for (const auto& [j, c] : bv.entries()) {
            auto it = am.cols.find(j);
            if (it != am.cols.end()) out.add(c, it->second);
        }
        return out.take();
    }
    const auto& bm = std::get<OpCoeff>(b);
    OpCoeff out;
    for (const auto& [j, col] : bm.cols) {
        VecBuilder img;
        for (const auto& [i, c] : col.entries()) {
            auto it = am.cols.find(i);
            if (it != am.cols.end()) img.add(c, it->second);
        }
        SparseVector v = img.take();
        if (!v.is_zero()) out.cols.emplace(j, std::move(v));
    }
    return out;
}

Coeff zero_coeff(const SpaceSig& sig) {
    switch (sig.kind) {
        case SpaceSig::Kind::Scalar: return Rat(0);
        case SpaceSig::Kind::Vec: return SparseVector{};
        case SpaceSig::Kind::Op: return OpCoeff{};
    }
    return Rat(0);
}

}  // namespace

// ---------------------------------------------------------------------------
// CoeffWindow

int CoeffWindow::axis_of(Var v) const {
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i] == v) return static_cast<int>(i);
    return -1;
}

bool CoeffWindow::in_box(const Tuple& t) const {
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (!box[i].contains(t[i])) return false;
    return true;
}

long CoeffWindow::weight_of(const Tuple& t) const {
    long s = weight->offset;
    for (long e : t) s = sat_add(s, e);
    return s;
}

bool CoeffWindow::sound_at(const Tuple& t) const {
    if (!weight) return true;
    long w = weight_of(t);
    if (w < weight->zero.lo || w > weight->zero.hi) return true;  // known zero out there
    return w <= weight->sound_hi;
}

void CoeffWindow::add(const Tuple& t, const Rat& s, const Coeff& c) {
    if (s.is_zero() || coeff_is_zero(c)) return;
    auto it = coeffs.find(t);
    if (it == coeffs.end()) {
        Coeff z = zero_coeff(sig);
        coeff_accumulate(z, s, c);
        if (!coeff_is_zero(z)) coeffs.emplace(t, std::move(z));
        return;
    }
    coeff_accumulate(it->second, s, c);
    if (coeff_is_zero(it->second)) coeffs.erase(it);
}

const Coeff* CoeffWindow::get(const Tuple& t) const {
    auto it = coeffs.find(t);
    return it == coeffs.end() ? nullptr : &it->second;
}

void CoeffWindow::validate() const {
    if (vars.size() != box.size() || vars.size() != edges.size())
        fail(ErrCode::Schema, "window axis arrays disagree");
    if (!std::is_sorted(vars.begin(), vars.end()))
        fail(ErrCode::Schema, "window variables not sorted");
    for (const auto& [t, c] : coeffs) {
        if (t.size() != vars.size()) fail(ErrCode::Schema, "tuple arity mismatch");
        if (!in_box(t)) fail(ErrCode::Schema, "stored tuple outside window box");
        if (coeff_is_zero(c)) fail(ErrCode::Schema, "stored zero coefficient");
        if (weight && !sound_at(t)) fail(ErrCode::Schema, "stored unsound coefficient");
    }
}

std::string CoeffWindow::str() const {
    std::ostringstream os;
    os << "window[";
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (i) os << ",";
        os << vars[i].name() << ":" << box[i].lo << ".." << box[i].hi;
    }
    os << "] " << sig.str() << " {";
    bool first = true;
    for (const auto& [t, c] : coeffs) {
        if (!first) os << "; ";
        os << "(";
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (i) os << ",";
            os << t[i];
        }
        os << "): " << coeff_str(c);
        first = false;
    }
    os << "}";
    return os.str();
}

// ---------------------------------------------------------------------------
// Expression constructors

std::string ExpArg::str() const {
    std::string s = (first.sign < 0 ? "-" : "") + first.v.name();
    if (second) s += (second->sign < 0 ? "-" : "+") + second->v.name();
    return s;
}

namespace {
ExprPtr make(DistExpr::Kind k) { return std::make_shared<DistExpr>(k, Var::intern("_")); }
}  // namespace

ExprPtr atom(CoeffWindow w) {
    w.validate();
    auto e = make(DistExpr::Kind::Atom);
    const_cast<DistExpr&>(*e).window = std::move(w);
    return e;
}

ExprPtr sum(std::vector<ExprPtr> kids) {
    if (kids.empty()) fail(ErrCode::Internal, "empty sum");
    if (kids.size() == 1) return kids[0];
    auto e = make(DistExpr::Kind::Sum);
    const_cast<DistExpr&>(*e).kids = std::move(kids);
    return e;
}

ExprPtr sum(ExprPtr a, ExprPtr b) { return sum(std::vector<ExprPtr>{std::move(a), std::move(b)}); }

ExprPtr sub(ExprPtr a, ExprPtr b) { return sum(std::move(a), scale(Rat(-1), std::move(b))); }

ExprPtr scale(Rat c, ExprPtr e) {
    auto out = make(DistExpr::Kind::Scale);
    auto& m = const_cast<DistExpr&>(*out);
    m.factor = std::move(c);
    m.kids = {std::move(e)};
    return out;
}

ExprPtr prod(ExprPtr a, ExprPtr b) {
    auto out = make(DistExpr::Kind::Product);
    const_cast<DistExpr&>(*out).kids = {std::move(a), std::move(b)};
    return out;
}

ExprPtr binom_pow(ExpArg arg, long n) {
    if (arg.second && arg.first.v == arg.second->v)
        fail(ErrCode::Schema, "binomial argument repeats a variable");
    auto out = make(DistExpr::Kind::BinomPow);
    auto& m = const_cast<DistExpr&>(*out);
    m.arg = arg;
    m.power = n;
    return out;
}

ExprPtr delta(ExpArg arg, Var second) {
    if (arg.first.v == second || (arg.second && arg.second->v == second))
        fail(ErrCode::Schema, "delta repeats a variable");
    auto out = std::make_shared<DistExpr>(DistExpr::Kind::Delta, second);
    const_cast<DistExpr&>(*out).arg = arg;
    return out;
}

ExprPtr residue(ExprPtr e, Var v) {
    auto out = std::make_shared<DistExpr>(DistExpr::Kind::Residue, v);
    const_cast<DistExpr&>(*out).kids = {std::move(e)};
    return out;
}

ExprPtr deriv(ExprPtr e, Var v) {
    auto out = std::make_shared<DistExpr>(DistExpr::Kind::Derivative, v);
    const_cast<DistExpr&>(*out).kids = {std::move(e)};
    return out;
}

ExprPtr shift(ExprPtr e, Var src, ExpArg target) {
    if (target.first.v == src || (target.second && target.second->v == src))
        fail(ErrCode::Schema, "shift target reuses the source variable");
    auto out = std::make_shared<DistExpr>(DistExpr::Kind::Shift, src);
    auto& m = const_cast<DistExpr&>(*out);
    m.kids = {std::move(e)};
    m.arg = target;
    return out;
}

std::string DistExpr::str() const {
    switch (kind) {
        case Kind::Atom: return "atom(" + window.sig.str() + ")";
        case Kind::Sum: return "sum/" + std::to_string(kids.size());
        case Kind::Scale: return "scale(" + factor.str() + ")";
        case Kind::Product: return "product";
        case Kind::BinomPow: return "(" + arg.str() + ")^" + std::to_string(power);
        case Kind::Delta: return "delta(" + arg.str() + "," + var.name() + ")";
        case Kind::Residue: return "res_" + var.name();
        case Kind::Derivative: return "d/d" + var.name();
        case Kind::Shift: return var.name() + "->" + arg.str();
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Binomial coefficients

Rat binom_coeff(long n, long k) {
    if (k < 0) fail(ErrCode::Schema, "binom requires k >= 0");
    mpz_class num = 1;
    for (long i = 0; i < k; ++i) num *= mpz_class(n - i);
    mpz_class den;
    mpz_fac_ui(den.get_mpz_t(), static_cast<unsigned long>(k));
    return Rat(mpq_class(num, den));
}

// ---------------------------------------------------------------------------
// Shapes and evaluation

namespace {

struct Shape {
    std::vector<Var> vars;          // sorted
    std::vector<Interval> support;  // parallel; +-kInf allowed
    std::optional<WeightInfo> weight;
    SpaceSig sig;
    bool fully_sound = true;

    Interval support_of(Var v) const {
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (vars[i] == v) return support[i];
        return Interval::at(0);
    }
};

std::vector<Var> merge_var_lists(const std::vector<Var>& a, const std::vector<Var>& b) {
    std::vector<Var> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool weight_fully_sound(const std::optional<WeightInfo>& w) {
    return !w || w->sound_hi >= w->zero.hi;
}

// Truncation clamps implied by the coefficient space itself: vector
// coefficients over a Z+-graded space live in weights [0, D]; a truncated
// space leaves weights beyond D untracked.
void clamp_to_space(std::optional<WeightInfo>& w, const SpaceSig& sig) {
    if (!w || sig.kind != SpaceSig::Kind::Vec) return;
    const GradedSpace* s = sig.dst;
    w->zero.lo = std::max(w->zero.lo, 0L);
    if (s->complete())
        w->zero.hi = std::min(w->zero.hi, static_cast<long>(s->max_degree()));
    else
        w->sound_hi = std::min(w->sound_hi, static_cast<long>(s->max_degree()));
}

std::optional<WeightInfo> merge_sum_weights(const std::vector<const Shape*>& kids) {
    bool all_sound = true;
    for (const auto* k : kids) all_sound &= k->fully_sound;
    bool all_weighted = true;
    for (const auto* k : kids) all_weighted &= k->weight.has_value();
    if (all_weighted) {
        long off = kids[0]->weight->offset;
        bool same = true;
        for (const auto* k : kids) same &= (k->weight->offset == off);
        if (same) {
            WeightInfo w = *kids[0]->weight;
            for (const auto* k : kids) {
                w.zero = w.zero.hull(k->weight->zero);
                w.sound_hi = std::min(w.sound_hi, k->weight->sound_hi);
            }
            return w;
        }
    }
    if (all_sound) return std::nullopt;
    fail(ErrCode::InsufficientWindow,
         "cannot merge truncation bookkeeping across a heterogeneous sum");
}

class Eval {
  public:
    CoeffWindow run(const ExprPtr& e, const ExpWindow& req);
    const Shape& shape(const ExprPtr& e);

  private:
    std::map<const DistExpr*, Shape> shapes_;

    CoeffWindow eval(const ExprPtr& e, const ExpWindow& req);
    CoeffWindow eval_atom(const DistExpr& x, const ExpWindow& req, const Shape& sh);
    CoeffWindow eval_sum(const DistExpr& x, const ExpWindow& req, const Shape& sh);
    CoeffWindow eval_product(const DistExpr& x, const ExpWindow& req, const Shape& sh);
    CoeffWindow eval_binom(const DistExpr& x, const ExpWindow& req, const Shape& sh);
    CoeffWindow eval_delta(const DistExpr& x, const ExpWindow& req, const Shape& sh);
    CoeffWindow eval_residue(const DistExpr& x, const ExpWindow& req, const Shape& sh);
    CoeffWindow eval_deriv(const DistExpr& x, const ExpWindow& req, const Shape& sh);
    CoeffWindow eval_shift(const DistExpr& x, const ExpWindow& req, const Shape& sh);

    CoeffWindow frame(const ExpWindow& req, const Shape& sh) const;
    void finalize(CoeffWindow& w) const;
};

CoeffWindow Eval::frame(const ExpWindow& req, const Shape& sh) const {
    CoeffWindow w;
    for (const auto& [v, iv] : req.entries()) {
        w.vars.push_back(v);
        w.box.push_back(iv);
        Interval s = sh.support_of(v);
        Edge below = s.lo >= iv.lo ? Edge::Zero : (sh.fully_sound ? Edge::Dense : Edge::Unsound);
        Edge above = s.hi <= iv.hi ? Edge::Zero : (sh.fully_sound ? Edge::Dense : Edge::Unsound);
        w.edges.emplace_back(below, above);
    }
    w.weight = sh.weight;
    w.sig = sh.sig;
    return w;
}

void Eval::finalize(CoeffWindow& w) const {
    for (auto it = w.coeffs.begin(); it != w.coeffs.end();) {
        if (coeff_is_zero(it->second) || !w.sound_at(it->first))
            it = w.coeffs.erase(it);
        else
            ++it;
    }
}

CoeffWindow Eval::run(const ExprPtr& e, const ExpWindow& req) {
    const Shape& sh = shape(e);
    for (Var v : sh.vars)
        if (!req.has(v)) fail(ErrCode::Schema, "request window missing variable " + v.name());
    return eval(e, req);
}

const Shape& Eval::shape(const ExprPtr& e) {
    auto hit = shapes_.find(e.get());
    if (hit != shapes_.end()) return hit->second;
    Shape sh;
    const DistExpr& x = *e;
    switch (x.kind) {
        case DistExpr::Kind::Atom: {
            const CoeffWindow& w = x.window;
            sh.vars = w.vars;
            for (std::size_t i = 0; i < w.vars.size(); ++i) {
                Interval s = w.box[i];
                if (w.edges[i].first != Edge::Zero) s.lo = -kInf;
                if (w.edges[i].second != Edge::Zero) s.hi = kInf;
                sh.support.push_back(s);
                if (w.edges[i].first == Edge::Unsound || w.edges[i].second == Edge::Unsound)
                    sh.fully_sound = false;
            }
            sh.weight = w.weight;
            sh.sig = w.sig;
            if (!weight_fully_sound(sh.weight)) sh.fully_sound = false;
            break;
        }
        case DistExpr::Kind::Sum: {
            std::vector<const Shape*> ks;
            for (const auto& k : x.kids) ks.push_back(&shape(k));
            for (const auto* k : ks) sh.vars = merge_var_lists(sh.vars, k->vars);
            for (Var v : sh.vars) {
                Interval s{0, 0};
                bool first = true;
                for (const auto* k : ks) {
                    Interval si = k->support_of(v);
                    s = first ? si : s.hull(si);
                    first = false;
                }
                sh.support.push_back(s);
            }
            for (std::size_t i = 1; i < ks.size(); ++i)
                if (!(ks[i]->sig == ks[0]->sig))
                    fail(ErrCode::IllDefinedProduct, "sum of windows over different spaces");
            sh.sig = ks[0]->sig;
            sh.weight = merge_sum_weights(ks);
            for (const auto* k : ks) sh.fully_sound &= k->fully_sound;
            clamp_to_space(sh.weight, sh.sig);
            break;
        }
        case DistExpr::Kind::Scale: {
            sh = shape(x.kids[0]);
            break;
        }
        case DistExpr::Kind::Product: {
            const Shape& f = shape(x.kids[0]);
            const Shape& g = shape(x.kids[1]);
            sh.vars = merge_var_lists(f.vars, g.vars);
            for (Var v : sh.vars) {
                Interval sf = f.support_of(v), sg = g.support_of(v);
                if ((sf.lo <= -kInf && sg.hi >= kInf) || (sf.hi >= kInf && sg.lo <= -kInf))
                    fail(ErrCode::IllDefinedProduct,
                         "infinitely many splittings of exponent in " + v.name());
                sh.support.push_back(sf.plus(sg));
            }
            sh.sig = compose_sig(f.sig, g.sig);
            if (f.weight && g.weight) {
                WeightInfo w;
                w.offset = sat_add(f.weight->offset, g.weight->offset);
                w.zero = f.weight->zero.plus(g.weight->zero);
                long c1 = weight_fully_sound(f.weight)
                              ? kInf
                              : sat_add(f.weight->sound_hi, g.weight->zero.lo);
                long c2 = weight_fully_sound(g.weight)
                              ? kInf
                              : sat_add(g.weight->sound_hi, f.weight->zero.lo);
                w.sound_hi = std::min(c1, c2);
                if (sh.sig.kind == SpaceSig::Kind::Op && f.sig.kind == SpaceSig::Kind::Op &&
                    g.sig.kind == SpaceSig::Kind::Op && !f.sig.src->complete()) {
                    // composition through a truncated middle space
                    w.sound_hi = std::min(
                        w.sound_hi,
                        sat_add(static_cast<long>(f.sig.src->max_degree()), f.weight->zero.lo));
                }
                sh.weight = w;
            } else if (f.fully_sound && g.fully_sound) {
                sh.weight = std::nullopt;
            } else {
                fail(ErrCode::InsufficientWindow,
                     "truncated factor without weight bookkeeping in a product");
            }
            sh.fully_sound = f.fully_sound && g.fully_sound;
            clamp_to_space(sh.weight, sh.sig);
            break;
        }
        case DistExpr::Kind::BinomPow: {
            long n = x.power;
            if (!x.arg.second) {
                sh.vars = {x.arg.first.v};
                sh.support = {Interval::at(n)};
            } else {
                Var v1 = x.arg.first.v, v2 = x.arg.second->v;
                sh.vars = merge_var_lists({v1}, {v2});
                Interval s1 = n >= 0 ? Interval{0, n} : Interval{-kInf, n};
                Interval s2 = n >= 0 ? Interval{0, n} : Interval{0, kInf};
                for (Var v : sh.vars) sh.support.push_back(v == v1 ? s1 : s2);
            }
            sh.weight = WeightInfo{-n, Interval::at(0), kInf};
            sh.sig = SpaceSig::scalar();
            break;
        }
        case DistExpr::Kind::Delta: {
            std::vector<Var> vs{x.arg.first.v, x.var};
            if (x.arg.second) vs.push_back(x.arg.second->v);
            std::sort(vs.begin(), vs.end());
            sh.vars = vs;
            for (Var v : sh.vars) {
                if (x.arg.second && v == x.arg.second->v)
                    sh.support.push_back({0, kInf});
                else
                    sh.support.push_back(Interval::all());
            }
            sh.weight = WeightInfo{1, Interval::at(0), kInf};
            sh.sig = SpaceSig::scalar();
            break;
        }
        case DistExpr::Kind::Residue: {
            const Shape& k = shape(x.kids[0]);
            sh = k;
            int ax = -1;
            for (std::size_t i = 0; i < k.vars.size(); ++i)
                if (k.vars[i] == x.var) ax = static_cast<int>(i);
            if (ax >= 0) {
                sh.vars.erase(sh.vars.begin() + ax);
                sh.support.erase(sh.support.begin() + ax);
            }
            if (sh.weight) sh.weight->offset = sat_add(sh.weight->offset, -1);
            break;
        }
        case DistExpr::Kind::Derivative: {
            sh = shape(x.kids[0]);
            for (std::size_t i = 0; i < sh.vars.size(); ++i)
                if (sh.vars[i] == x.var)
                    sh.support[i] = {sat_add(sh.support[i].lo, -1), sat_add(sh.support[i].hi, -1)};
            if (sh.weight) sh.weight->offset = sat_add(sh.weight->offset, 1);
            break;
        }
        case DistExpr::Kind::Shift: {
            const Shape& k = shape(x.kids[0]);
            Interval s = k.support_of(x.var);
            Var v1 = x.arg.first.v;
            sh.sig = k.sig;
            sh.weight = k.weight;
            sh.fully_sound = k.fully_sound;
            std::vector<Var> rest;
            std::vector<Interval> rest_s;
            for (std::size_t i = 0; i < k.vars.size(); ++i)
                if (k.vars[i] != x.var) {
                    rest.push_back(k.vars[i]);
                    rest_s.push_back(k.support[i]);
                }
            auto own = [&](Var v) {
                for (std::size_t i = 0; i < rest.size(); ++i)
                    if (rest[i] == v) return rest_s[i];
                return Interval::at(0);
            };
            if (!x.arg.second) {
                sh.vars = merge_var_lists(rest, {v1});
                for (Var v : sh.vars) sh.support.push_back(v == v1 ? own(v).plus(s) : own(v));
            } else {
                Var v2 = x.arg.second->v;
                Interval c1 = s.lo >= 0 ? Interval{0, s.hi} : Interval{-kInf, s.hi};
                Interval c2 = s.lo >= 0 ? Interval{0, s.hi} : Interval{0, kInf};
                sh.vars = merge_var_lists(rest, merge_var_lists({v1}, {v2}));
                for (Var v : sh.vars) {
                    Interval base = own(v);
                    if (v == v1) base = base.plus(c1);
                    else if (v == v2) base = base.plus(c2);
                    sh.support.push_back(base);
                }
            }
            break;
        }
    }
    return shapes_.emplace(e.get(), std::move(sh)).first->second;
}

CoeffWindow Eval::eval(const ExprPtr& e, const ExpWindow& req) {
    const Shape& sh = shape(e);
    switch (e->kind) {
        case DistExpr::Kind::Atom: return eval_atom(*e, req, sh);
        case DistExpr::Kind::Sum: return eval_sum(*e, req, sh);
        case DistExpr::Kind::Scale: {
            CoeffWindow w = eval(e->kids[0], req);
            if (e->factor.is_zero()) {
                w.coeffs.clear();
                return w;
            }
            for (auto& [t, c] : w.coeffs) {
                Coeff z = zero_coeff(w.sig);
                coeff_accumulate(z, e->factor, c);
                c = std::move(z);
            }
            finalize(w);
            return w;
        }
        case DistExpr::Kind::Product: return eval_product(*e, req, sh);
        case DistExpr::Kind::BinomPow: return eval_binom(*e, req, sh);
        case DistExpr::Kind::Delta: return eval_delta(*e, req, sh);
        case DistExpr::Kind::Residue: return eval_residue(*e, req, sh);
        case DistExpr::Kind::Derivative: return eval_deriv(*e, req, sh);
        case DistExpr::Kind::Shift: return eval_shift(*e, req, sh);
    }
    fail(ErrCode::Internal, "unreachable expression kind");
}

CoeffWindow Eval::eval_atom(const DistExpr& x, const ExpWindow& req, const Shape& sh) {
    const CoeffWindow& a = x.window;
    CoeffWindow out = frame(req, sh);

    bool inside = true;
    for (std::size_t i = 0; i < a.vars.size() && inside; ++i) {
        Interval r = req.get(a.vars[i]);
        inside = a.box[i].lo <= r.lo && r.hi <= a.box[i].hi;
    }
    if (!inside) {
        // Exact audit over the atom's own axes: every requested exponent must
        // be stored, known zero, or excluded by weight bookkeeping.
        std::vector<Interval> ivs;
        for (Var v : a.vars) ivs.push_back(req.get(v));
        Tuple t(a.vars.size());
        std::function<void(std::size_t)> walk = [&](std::size_t i) {
            if (i == a.vars.size()) {
                if (a.in_box(t)) return;
                for (std::size_t j = 0; j < a.vars.size(); ++j) {
                    if (t[j] < a.box[j].lo && a.edges[j].first == Edge::Zero) return;
                    if (t[j] > a.box[j].hi && a.edges[j].second == Edge::Zero) return;
                }
                if (a.weight) {
                    long w = a.weight_of(t);
                    if (w < a.weight->zero.lo || w > a.weight->zero.hi) return;
                    if (w > a.weight->sound_hi) return;  // tracked as unsound
                }
                fail(ErrCode::InsufficientWindow,
                     "atom over " + a.sig.str() + " cannot supply the requested exponents");
            } else {
                for (long e2 = ivs[i].lo; e2 <= ivs[i].hi; ++e2) {
                    t[i] = e2;
                    walk(i + 1);
                }
            }
        };
        walk(0);
    }

    std::vector<int> pos(a.vars.size());
    for (std::size_t i = 0; i < a.vars.size(); ++i) pos[i] = out.axis_of(a.vars[i]);
    for (std::size_t i = 0; i < out.vars.size(); ++i)
        if (a.axis_of(out.vars[i]) < 0 && !out.box[i].contains(0)) return out;  // zero slice off-box
    for (const auto& [t, c] : a.coeffs) {
        Tuple full(out.vars.size(), 0);
        bool ok = true;
        for (std::size_t i = 0; i < t.size() && ok; ++i) {
            full[pos[i]] = t[i];
            ok = out.box[pos[i]].contains(t[i]);
        }
        if (ok) out.add(full, Rat(1), c);
    }
    finalize(out);
    return out;
}

CoeffWindow Eval::eval_sum(const DistExpr& x, const ExpWindow& req, const Shape& sh) {
    CoeffWindow out = frame(req, sh);
    for (const auto& k : x.kids) {
        ExpWindow subreq;
        for (Var v : shape(k).vars) subreq.set(v, req.get(v));
        CoeffWindow w = eval(k, subreq);
        std::vector<int> pos(w.vars.size());
        for (std::size_t i = 0; i < w.vars.size(); ++i) pos[i] = out.axis_of(w.vars[i]);
        bool zero_slice_ok = true;
        for (std::size_t i = 0; i < out.vars.size(); ++i)
            if (w.axis_of(out.vars[i]) < 0 && !out.box[i].contains(0)) zero_slice_ok = false;
        if (!zero_slice_ok) continue;
        for (const auto& [t, c] : w.coeffs) {
            Tuple full(out.vars.size(), 0);
            bool ok = true;
            for (std::size_t i = 0; i < t.size() && ok; ++i) {
                full[pos[i]] = t[i];
                ok = out.box[pos[i]].contains(t[i]);
            }
            if (ok) out.add(full, Rat(1), c);
        }
    }
    finalize(out);
    return out;
}

CoeffWindow Eval::eval_product(const DistExpr& x, const ExpWindow& req, const Shape& sh) {
    const Shape& f = shape(x.kids[0]);
    const Shape& g = shape(x.kids[1]);
    CoeffWindow out = frame(req, sh);

    auto child_req = [&](const Shape& mine, const Shape& partner, bool& possible) {
        ExpWindow subreq;
        for (Var v : mine.vars) {
            Interval r = req.get(v);
            Interval want = iv_minus(r, partner.support_of(v)).intersect(mine.support_of(v));
            if (want.empty()) {
                possible = false;
                want = {0, 0};
            } else if (want.lo <= -kInf || want.hi >= kInf) {
                fail(ErrCode::IllDefinedProduct,
                     "unbounded request for a factor in variable " + v.name());
            }
            subreq.set(v, want);
        }
        return subreq;
    };

    bool possible = true;
    ExpWindow reqf = child_req(f, g, possible);
    ExpWindow reqg = child_req(g, f, possible);
    if (!possible) return out;

    CoeffWindow wf = eval(x.kids[0], reqf);
    CoeffWindow wg = eval(x.kids[1], reqg);

    std::vector<int> posf(wf.vars.size()), posg(wg.vars.size());
    for (std::size_t i = 0; i < wf.vars.size(); ++i) posf[i] = out.axis_of(wf.vars[i]);
    for (std::size_t i = 0; i < wg.vars.size(); ++i) posg[i] = out.axis_of(wg.vars[i]);

    for (const auto& [tf, cf] : wf.coeffs) {
        for (const auto& [tg, cg] : wg.coeffs) {
            Tuple t(out.vars.size(), 0);
            for (std::size_t i = 0; i < tf.size(); ++i) t[posf[i]] += tf[i];
            for (std::size_t i = 0; i < tg.size(); ++i) t[posg[i]] += tg[i];
            if (!out.in_box(t)) continue;
            out.add(t, Rat(1), compose_coeff(cf, cg, wf.sig, wg.sig));
        }
    }
    finalize(out);
    return out;
}

CoeffWindow Eval::eval_binom(const DistExpr& x, const ExpWindow& req, const Shape& sh) {
    CoeffWindow out = frame(req, sh);
    long n = x.power;
    if (!x.arg.second) {
        Interval r = req.get(x.arg.first.v);
        if (r.contains(n)) {
            Tuple t(out.vars.size(), 0);
            t[out.axis_of(x.arg.first.v)] = n;
            out.add(t, sgn_pow(x.arg.first.sign, n), Rat(1));
        }
        finalize(out);
        return out;
    }
    Var v1 = x.arg.first.v, v2 = x.arg.second->v;
    Interval r1 = req.get(v1), r2 = req.get(v2);
    int a1 = out.axis_of(v1), a2 = out.axis_of(v2);
    long klo = std::max(r2.lo, 0L);
    long khi = (n >= 0) ? std::min(r2.hi, n) : r2.hi;
    for (long k = klo; k <= khi; ++k) {
        long e1 = n - k;
        if (!r1.contains(e1)) continue;
        Rat c = binom_coeff(n, k) * sgn_pow(x.arg.first.sign, e1) * sgn_pow(x.arg.second->sign, k);
        Tuple t(out.vars.size(), 0);
        t[a1] = e1;
        t[a2] = k;
        out.add(t, Rat(1), c);
    }
    finalize(out);
    return out;
}

CoeffWindow Eval::eval_delta(const DistExpr& x, const ExpWindow& req, const Shape& sh) {
    CoeffWindow out = frame(req, sh);
    Var y = x.var;
    Interval ry = req.get(y);
    int ay = out.axis_of(y);
    if (!x.arg.second) {
        Var u = x.arg.first.v;
        Interval ru = req.get(u);
        int au = out.axis_of(u);
        for (long ey = ry.lo; ey <= ry.hi; ++ey) {
            long n = -ey - 1;
            if (!ru.contains(n)) continue;
            Tuple t(out.vars.size(), 0);
            t[au] = n;
            t[ay] = ey;
            out.add(t, sgn_pow(x.arg.first.sign, n), Rat(1));
        }
        finalize(out);
        return out;
    }
    Var u = x.arg.first.v, v = x.arg.second->v;
    Interval ru = req.get(u), rv = req.get(v);
    int au = out.axis_of(u), av = out.axis_of(v);
    for (long ey = ry.lo; ey <= ry.hi; ++ey) {
        long n = -ey - 1;
        for (long k = std::max(rv.lo, 0L); k <= rv.hi; ++k) {
            long eu = n - k;
            if (!ru.contains(eu)) continue;
            Rat c =
                binom_coeff(n, k) * sgn_pow(x.arg.first.sign, eu) * sgn_pow(x.arg.second->sign, k);
            Tuple t(out.vars.size(), 0);
            t[au] = eu;
            t[av] = k;
            t[ay] = ey;
            out.add(t, Rat(1), c);
        }
    }
    finalize(out);
    return out;
}

CoeffWindow Eval::eval_residue(const DistExpr& x, const ExpWindow& req, const Shape& sh) {
    if (req.has(x.var)) fail(ErrCode::Schema, "request mentions bound variable " + x.var.name());
    ExpWindow subreq = req;
    subreq.set(x.var, -1, -1);
    CoeffWindow w = eval(x.kids[0], subreq);
    CoeffWindow out = frame(req, sh);
    int ax = w.axis_of(x.var);
    std::vector<int> pos;
    for (std::size_t i = 0; i < w.vars.size(); ++i)
        if (static_cast<int>(i) != ax) pos.push_back(out.axis_of(w.vars[i]));
    for (const auto& [t, c] : w.coeffs) {
        Tuple r(out.vars.size(), 0);
        std::size_t j = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (static_cast<int>(i) == ax) continue;
            r[pos[j++]] = t[i];
        }
        if (out.in_box(r)) out.add(r, Rat(1), c);
    }
    finalize(out);
    return out;
}

CoeffWindow Eval::eval_deriv(const DistExpr& x, const ExpWindow& req, const Shape& sh) {
    Interval r = req.get(x.var);
    ExpWindow subreq = req;
    subreq.set(x.var, r.lo + 1, r.hi + 1);
    CoeffWindow w = eval(x.kids[0], subreq);
    CoeffWindow out = frame(req, sh);
    int ax = w.axis_of(x.var);
    std::vector<int> pos(w.vars.size());
    for (std::size_t i = 0; i < w.vars.size(); ++i) pos[i] = out.axis_of(w.vars[i]);
    for (const auto& [t, c] : w.coeffs) {
        long m = t[ax];
        if (m == 0) continue;
        Tuple r2(out.vars.size(), 0);
        for (std::size_t i = 0; i < t.size(); ++i) r2[pos[i]] = t[i];
        r2[pos[ax]] = m - 1;
        if (out.in_box(r2)) out.add(r2, Rat(m), c);
    }
    finalize(out);
    return out;
}

CoeffWindow Eval::eval_shift(const DistExpr& x, const ExpWindow& req, const Shape& sh) {
    if (req.has(x.var)) fail(ErrCode::Schema, "request mentions bound variable " + x.var.name());
    const Shape& k = shape(x.kids[0]);
    Interval s = k.support_of(x.var);
    Var v1 = x.arg.first.v;
    CoeffWindow out = frame(req, sh);

    auto own_support = [&](Var v) { return v == x.var ? Interval::at(0) : k.support_of(v); };

    if (!x.arg.second) {
        Interval c1 = iv_minus(req.get(v1), own_support(v1)).intersect(s);
        if (c1.empty()) return out;
        ExpWindow subreq;
        for (Var v : k.vars) subreq.set(v, v == x.var ? c1 : req.get(v));
        CoeffWindow w = eval(x.kids[0], subreq);
        int ax = w.axis_of(x.var);
        std::vector<int> pos(w.vars.size());
        for (std::size_t i = 0; i < w.vars.size(); ++i)
            pos[i] = static_cast<int>(i) == ax ? out.axis_of(v1) : out.axis_of(w.vars[i]);
        for (const auto& [t, c] : w.coeffs) {
            Tuple r(out.vars.size(), 0);
            for (std::size_t i = 0; i < t.size(); ++i) r[pos[i]] += t[i];
            if (out.in_box(r)) out.add(r, sgn_pow(x.arg.first.sign, t[ax]), c);
        }
        finalize(out);
        return out;
    }

    Var v2 = x.arg.second->v;
    Interval c1 = iv_minus(req.get(v1), own_support(v1));
    Interval kk = iv_minus(req.get(v2), own_support(v2));
    kk.lo = std::max(kk.lo, 0L);
    if (kk.empty()) return out;
    Interval nrange = c1.plus(kk).intersect(s);
    if (nrange.empty()) return out;
    if (nrange.lo <= -kInf || nrange.hi >= kInf)
        fail(ErrCode::IllDefinedProduct, "unbounded substitution request in " + x.var.name());
    ExpWindow subreq;
    for (Var v : k.vars) subreq.set(v, v == x.var ? nrange : req.get(v));
    CoeffWindow w = eval(x.kids[0], subreq);

    int ax = w.axis_of(x.var);
    std::vector<int> pos(w.vars.size());
    for (std::size_t i = 0; i < w.vars.size(); ++i)
        pos[i] = static_cast<int>(i) == ax ? -1 : out.axis_of(w.vars[i]);
    int a1 = out.axis_of(v1), a2 = out.axis_of(v2);
    for (const auto& [t, c] : w.coeffs) {
        long n = t[ax];
        for (long kexp = kk.lo; kexp <= kk.hi; ++kexp) {
            if (n >= 0 && kexp > n) break;
            Rat coef = binom_coeff(n, kexp) * sgn_pow(x.arg.first.sign, n - kexp) *
                       sgn_pow(x.arg.second->sign, kexp);
            if (coef.is_zero()) continue;
            Tuple r(out.vars.size(), 0);
            for (std::size_t i = 0; i < t.size(); ++i)
                if (pos[i] >= 0) r[pos[i]] += t[i];
            r[a1] += n - kexp;
            r[a2] += kexp;
            if (out.in_box(r)) out.add(r, coef, c);
        }
    }
    finalize(out);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points

CoeffWindow evaluate(const ExprPtr& expr, const ExpWindow& request) {
    Eval ev;
    return ev.run(expr, request);
}

CoeffWindow binom_window(const ExpArg& arg, long n, const ExpWindow& request) {
    return evaluate(binom_pow(arg, n), request);
}

CoeffWindow delta_window(const ExpArg& arg, Var second, const ExpWindow& request) {
    return evaluate(delta(arg, second), request);
}

Interval support_of(const ExprPtr& expr, Var v) {
    Eval ev;
    return ev.shape(expr).support_of(v);
}

std::string IdentityVerdict::str() const {
    std::ostringstream os;
    if (equal) {
        os << "equal (" << compared << " coefficients";
        if (clipped) os << ", clipped to the sound region";
        os << ")";
        return os.str();
    }
    os << "mismatch at (";
    for (std::size_t i = 0; i < mismatch->size(); ++i) {
        if (i) os << ",";
        os << vars[i].name() << "^" << (*mismatch)[i];
    }
    os << "): lhs=" << lhs_val << " rhs=" << rhs_val;
    return os.str();
}

IdentityVerdict compare_windows(const CoeffWindow& l, const CoeffWindow& r,
                                const ExpWindow& request) {
    if (!(l.sig == r.sig))
        fail(ErrCode::IllDefinedProduct, "comparing windows over different spaces");
    IdentityVerdict v;
    v.vars = l.vars;

    auto jointly_sound = [&](const Tuple& t) { return l.sound_at(t) && r.sound_at(t); };

    long smax = 0;
    for (const auto& [var, iv] : request.entries()) smax = sat_add(smax, iv.hi);
    for (const CoeffWindow* w : {&l, &r}) {
        if (!w->weight) continue;
        long wmax = sat_add(w->weight->offset, smax);
        if (w->weight->sound_hi < std::min(w->weight->zero.hi, wmax)) v.clipped = true;
    }

    auto it_l = l.coeffs.begin();
    auto it_r = r.coeffs.begin();
    while (it_l != l.coeffs.end() || it_r != r.coeffs.end()) {
        int cmp;
        if (it_l == l.coeffs.end()) cmp = 1;
        else if (it_r == r.coeffs.end()) cmp = -1;
        else cmp = it_l->first < it_r->first ? -1 : (it_r->first < it_l->first ? 1 : 0);
        const Tuple& t = cmp <= 0 ? it_l->first : it_r->first;
        if (!jointly_sound(t)) {
            if (cmp <= 0) ++it_l;
            if (cmp >= 0) ++it_r;
            continue;
        }
        ++v.compared;
        bool same = cmp == 0 && it_l->second == it_r->second;
        if (!same) {
            v.equal = false;
            v.mismatch = t;
            v.lhs_val = cmp <= 0 ? coeff_str(it_l->second) : "0";
            v.rhs_val = cmp >= 0 ? coeff_str(it_r->second) : "0";
            return v;
        }
        ++it_l;
        ++it_r;
    }
    return v;
}

IdentityVerdict check_identity(const ExprPtr& lhs, const ExprPtr& rhs, const ExpWindow& request) {
    CoeffWindow l = evaluate(lhs, request);
    CoeffWindow r = evaluate(rhs, request);
    return compare_windows(l, r, request);
}

}  // namespace vertexcalc
