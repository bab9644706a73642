#include "sds/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sds {

namespace {

// ---- tokens --------------------------------------------------------------

enum class Tok {
    Name, Num, DBasis, Star, Slash, Plus, Minus, Caret,
    LParen, RParen, LBrace, RBrace, LBracket, RBracket,
    Comma, Colon, Arrow, Less, Greater, Equal, End
};

const char* tok_spelling(Tok t) {
    switch (t) {
        case Tok::Name: return "name";
        case Tok::Num: return "number";
        case Tok::DBasis: return "d/d<coord>";
        case Tok::Star: return "*";
        case Tok::Slash: return "/";
        case Tok::Plus: return "+";
        case Tok::Minus: return "-";
        case Tok::Caret: return "^";
        case Tok::LParen: return "(";
        case Tok::RParen: return ")";
        case Tok::LBrace: return "{";
        case Tok::RBrace: return "}";
        case Tok::LBracket: return "[";
        case Tok::RBracket: return "]";
        case Tok::Comma: return ",";
        case Tok::Colon: return ":";
        case Tok::Arrow: return "->";
        case Tok::Less: return "<";
        case Tok::Greater: return ">";
        case Tok::Equal: return "=";
        case Tok::End: return "end of input";
    }
    return "?";
}

struct Token {
    Tok kind = Tok::End;
    std::string text;  // Name/DBasis payload, or the literal spelling
    double num = 0.0;
    bool is_int = false;
    std::int64_t ival = 0;
    int line = 1, col = 1;
};

bool name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::vector<std::string> source_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    lines.push_back(cur);
    return lines;
}

struct Lexer {
    const std::string& src;
    std::vector<Token> toks;
    std::vector<ParseError> errors;
    const std::vector<std::string>& lines;

    Lexer(const std::string& s, const std::vector<std::string>& ls) : src(s), lines(ls) {}

    std::string excerpt(int line) const {
        if (line < 1 || line > static_cast<int>(lines.size())) return "";
        return lines[line - 1];
    }

    void run() {
        size_t i = 0;
        int line = 1, col = 1;
        auto advance = [&](size_t k) {
            for (size_t j = 0; j < k; ++j) {
                if (i + j < src.size() && src[i + j] == '\n') {
                    ++line;
                    col = 1;
                } else {
                    ++col;
                }
            }
            i += k;
        };
        auto push = [&](Tok kind, const std::string& text, size_t len) {
            Token t;
            t.kind = kind;
            t.text = text;
            t.line = line;
            t.col = col;
            toks.push_back(t);
            advance(len);
        };
        while (i < src.size()) {
            char c = src[i];
            if (c == '#') {
                while (i < src.size() && src[i] != '\n') advance(1);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance(1);
                continue;
            }
            // basis token d/d<name>
            if (c == 'd' && i + 3 < src.size() && src[i + 1] == '/' && src[i + 2] == 'd' &&
                name_start(src[i + 3])) {
                size_t j = i + 3;
                while (j < src.size() && name_char(src[j])) ++j;
                push(Tok::DBasis, src.substr(i + 3, j - i - 3), j - i);
                continue;
            }
            if (name_start(c)) {
                size_t j = i;
                while (j < src.size() && name_char(src[j])) ++j;
                push(Tok::Name, src.substr(i, j - i), j - i);
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c))) {
                size_t j = i;
                bool floating = false;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
                if (j + 1 < src.size() && src[j] == '.' &&
                    std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
                    floating = true;
                    ++j;
                    while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
                }
                if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                    size_t k = j + 1;
                    if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                    if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                        floating = true;
                        j = k;
                        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j])))
                            ++j;
                    }
                }
                std::string text = src.substr(i, j - i);
                Token t;
                t.kind = Tok::Num;
                t.text = text;
                t.num = std::strtod(text.c_str(), nullptr);
                t.line = line;
                t.col = col;
                if (!floating) {
                    errno = 0;
                    long long v = std::strtoll(text.c_str(), nullptr, 10);
                    if (errno == 0) {
                        t.is_int = true;
                        t.ival = v;
                    }
                }
                toks.push_back(t);
                advance(j - i);
                continue;
            }
            if (c == '-' && i + 1 < src.size() && src[i + 1] == '>') {
                push(Tok::Arrow, "->", 2);
                continue;
            }
            Tok kind;
            switch (c) {
                case '*': kind = Tok::Star; break;
                case '/': kind = Tok::Slash; break;
                case '+': kind = Tok::Plus; break;
                case '-': kind = Tok::Minus; break;
                case '^': kind = Tok::Caret; break;
                case '(': kind = Tok::LParen; break;
                case ')': kind = Tok::RParen; break;
                case '{': kind = Tok::LBrace; break;
                case '}': kind = Tok::RBrace; break;
                case '[': kind = Tok::LBracket; break;
                case ']': kind = Tok::RBracket; break;
                case ',': kind = Tok::Comma; break;
                case ':': kind = Tok::Colon; break;
                case '<': kind = Tok::Less; break;
                case '>': kind = Tok::Greater; break;
                case '=': kind = Tok::Equal; break;
                default: {
                    ParseError e;
                    std::ostringstream os;
                    os << "unexpected character '";
                    if (std::isprint(static_cast<unsigned char>(c)))
                        os << c;
                    else
                        os << "\\x" << std::hex << (static_cast<unsigned>(c) & 0xff);
                    os << "'";
                    e.message = os.str();
                    e.line = line;
                    e.column = col;
                    e.excerpt = excerpt(line);
                    errors.push_back(std::move(e));
                    advance(1);
                    continue;
                }
            }
            push(kind, std::string(1, c), 1);
        }
        Token end;
        end.kind = Tok::End;
        end.line = line;
        end.col = col;
        toks.push_back(end);
    }
};

const std::vector<std::string>& statement_keywords() {
    static const std::vector<std::string> kw = {"chart", "scalar", "field",  "operator",
                                               "sds",   "action", "map",    "system"};
    return kw;
}

bool is_statement_keyword(const Token& t) {
    if (t.kind != Tok::Name) return false;
    const auto& kw = statement_keywords();
    return std::find(kw.begin(), kw.end(), t.text) != kw.end();
}

// thrown to unwind to the statement loop after an error is recorded
struct Bail {};

// ---- raw statements (resolution happens after the whole text is read) ----

struct RawCoord {
    Token name;
    bool periodic = false;
    Expr period;
    std::optional<double> lower, upper;
};

struct RawChart {
    Token name;
    std::vector<RawCoord> coords;
};

struct RawExpr {
    Expr value;
    std::vector<Token> names;  // symbol use-sites for resolution
};

struct RawScalar {
    Token name, chart;
    RawExpr value;
};

struct VTerm {
    int sign = 1;
    RawExpr coef;
    Token basis;
};

struct RawField {
    Token name, chart;
    std::vector<VTerm> terms;
};

struct OpTerm {
    int sign = 1;
    RawExpr coef;
    std::vector<Token> basis;
};

struct RawOperator {
    Token name, chart;
    std::vector<OpTerm> terms;
};

struct RawSds {
    Token name, chart;
    std::vector<Token> drift, noise;
};

struct RawAction {
    Token name, chart;
    std::vector<Token> generators;
};

struct RawMap {
    Token name, source, target;
    std::vector<std::pair<Token, RawExpr>> components;  // target coord = expr(source)
    bool has_section = false;
    std::vector<std::pair<Token, RawExpr>> section;     // source coord = expr(target)
};

struct RawIsys {
    Token name, chart;
    std::vector<Token> lambdas, zs, fs;
};

struct Parser {
    const std::vector<Token>& toks;
    const std::vector<std::string>& lines;
    std::vector<ParseError>& errors;
    size_t pos = 0;

    std::vector<RawChart> charts;
    std::vector<RawScalar> scalars;
    std::vector<RawField> fields;
    std::vector<RawOperator> operators;
    std::vector<RawSds> sdss;
    std::vector<RawAction> actions;
    std::vector<RawMap> maps;
    std::vector<RawIsys> isystems;
    std::vector<std::pair<DeclKind, std::string>> order;
    std::map<std::string, Span> spans;

    Parser(const std::vector<Token>& t, const std::vector<std::string>& ls,
           std::vector<ParseError>& errs)
        : toks(t), lines(ls), errors(errs) {}

    const Token& peek(size_t ahead = 0) const {
        size_t i = pos + ahead;
        return i < toks.size() ? toks[i] : toks.back();
    }
    bool at(Tok k) const { return peek().kind == k; }
    const Token& take() {
        const Token& t = toks[pos];
        if (pos + 1 < toks.size()) ++pos;
        return t;
    }

    std::string excerpt(int line) const {
        if (line < 1 || line > static_cast<int>(lines.size())) return "";
        return lines[line - 1];
    }

    void report(const Token& where, const std::string& msg, std::vector<std::string> expected = {}) {
        ParseError e;
        e.message = msg;
        e.line = where.line;
        e.column = where.col;
        e.excerpt = excerpt(where.line);
        e.expected = std::move(expected);
        errors.push_back(std::move(e));
    }

    [[noreturn]] void fail(const Token& where, const std::string& msg,
                           std::vector<std::string> expected = {}) {
        report(where, msg, std::move(expected));
        throw Bail{};
    }

    const Token& expect(Tok k) {
        if (!at(k))
            fail(peek(), std::string("expected '") + tok_spelling(k) + "'", {tok_spelling(k)});
        return take();
    }

    Token expect_name(const char* what) {
        if (!at(Tok::Name)) fail(peek(), std::string("expected ") + what, {"name"});
        return take();
    }

    bool keyword(const char* kw) const { return at(Tok::Name) && peek().text == kw; }

    void expect_keyword(const char* kw) {
        if (!keyword(kw)) fail(peek(), std::string("expected '") + kw + "'", {kw});
        take();
    }

    void sync() {
        while (!at(Tok::End) && !is_statement_keyword(peek())) take();
    }

    // ---- expressions -----------------------------------------------------

    Expr parse_expr(RawExpr& out) {
        Expr v = parse_mul(out);
        while (at(Tok::Plus) || at(Tok::Minus)) {
            bool minus = take().kind == Tok::Minus;
            Expr r = parse_mul(out);
            v = minus ? v - r : v + r;
        }
        return v;
    }

    Expr parse_mul(RawExpr& out) {
        Expr v = parse_unary(out);
        while (at(Tok::Star) || at(Tok::Slash)) {
            if (at(Tok::Star) && peek(1).kind == Tok::DBasis) break;  // basis factor follows
            bool div = take().kind == Tok::Slash;
            const Token& site = peek();
            Expr r = parse_unary(out);
            if (div) {
                if (r.is_zero_literal()) fail(site, "division by zero");
                v = v / r;
            } else {
                v = v * r;
            }
        }
        return v;
    }

    Expr parse_unary(RawExpr& out) {
        if (at(Tok::Minus)) {
            take();
            return -parse_unary(out);
        }
        if (at(Tok::Plus)) {
            take();
            return parse_unary(out);
        }
        return parse_pow(out);
    }

    Expr parse_pow(RawExpr& out) {
        Expr base = parse_primary(out);
        if (at(Tok::Caret)) {
            take();
            int sign = 1;
            if (at(Tok::Minus)) {
                take();
                sign = -1;
            }
            const Token& e = peek();
            if (!at(Tok::Num) || !e.is_int) fail(e, "expected an integer exponent", {"number"});
            take();
            if (e.ival > 64) fail(e, "exponent out of range");
            int k = sign * static_cast<int>(e.ival);
            if (k < 0 && base.is_zero_literal()) fail(e, "zero raised to a negative power");
            base = base.pow(k);
        }
        return base;
    }

    Expr parse_primary(RawExpr& out) {
        const Token& t = peek();
        switch (t.kind) {
            case Tok::Num: {
                take();
                return t.is_int ? Expr::integer(t.ival) : Expr::floating(t.num);
            }
            case Tok::LParen: {
                take();
                Expr v = parse_expr(out);
                expect(Tok::RParen);
                return v;
            }
            case Tok::Name: {
                if (t.text == "pi") {
                    take();
                    return Expr::pi();
                }
                Fn fn = Fn::Sin;
                bool is_fn = true;
                if (t.text == "sin") fn = Fn::Sin;
                else if (t.text == "cos") fn = Fn::Cos;
                else if (t.text == "exp") fn = Fn::Exp;
                else if (t.text == "sqrt") fn = Fn::Sqrt;
                else is_fn = false;
                if (is_fn && peek(1).kind == Tok::LParen) {
                    take();
                    take();
                    RawExpr inner;
                    Expr arg = parse_expr(inner);
                    expect(Tok::RParen);
                    for (auto& n : inner.names) out.names.push_back(std::move(n));
                    if (fn == Fn::Sin) return sin(arg);
                    if (fn == Fn::Cos) return cos(arg);
                    if (fn == Fn::Exp) return exp(arg);
                    return sqrt(arg);
                }
                take();
                out.names.push_back(t);
                return Expr::symbol(t.text);
            }
            default:
                fail(t, "expected an expression", {"number", "name", "("});
        }
    }

    RawExpr parse_raw_expr() {
        RawExpr out;
        out.value = parse_expr(out);
        return out;
    }

    // ---- statements ------------------------------------------------------

    void parse_chart() {
        RawChart c;
        c.name = expect_name("a chart name");
        expect(Tok::LBrace);
        while (true) {
            RawCoord coord;
            coord.name = expect_name("a coordinate name");
            if (keyword("mod")) {
                take();
                RawExpr period = parse_raw_expr();
                if (!period.names.empty())
                    fail(period.names.front(), "period must be a constant expression");
                coord.periodic = true;
                coord.period = period.value;
                if (coord.period.is_zero_literal())
                    fail(coord.name, "period must be nonzero");
            } else {
                while (at(Tok::Greater) || at(Tok::Less)) {
                    bool lower = take().kind == Tok::Greater;
                    double sign = 1.0;
                    if (at(Tok::Minus)) {
                        take();
                        sign = -1.0;
                    }
                    const Token& n = peek();
                    if (!at(Tok::Num)) fail(n, "expected a numeric bound", {"number"});
                    take();
                    double v = sign * n.num;
                    auto& slot = lower ? coord.lower : coord.upper;
                    if (slot.has_value()) fail(n, "duplicate bound on this side");
                    slot = v;
                }
                if (coord.lower && coord.upper && *coord.lower >= *coord.upper)
                    fail(coord.name, "empty coordinate interval");
            }
            for (const auto& prev : c.coords)
                if (prev.name.text == coord.name.text)
                    fail(coord.name, "duplicate coordinate '" + coord.name.text + "'");
            c.coords.push_back(std::move(coord));
            if (at(Tok::Comma)) {
                take();
                continue;
            }
            break;
        }
        expect(Tok::RBrace);
        charts.push_back(std::move(c));
        note(DeclKind::Chart, charts.back().name);
    }

    void parse_scalar() {
        RawScalar s;
        s.name = expect_name("a scalar name");
        expect_keyword("on");
        s.chart = expect_name("a chart name");
        expect(Tok::Equal);
        s.value = parse_raw_expr();
        scalars.push_back(std::move(s));
        note(DeclKind::Scalar, scalars.back().name);
    }

    VTerm parse_vterm(int sign) {
        VTerm t;
        t.sign = sign;
        t.coef = parse_raw_expr();
        expect(Tok::Star);
        if (!at(Tok::DBasis)) fail(peek(), "expected a basis vector d/d<coord>", {"d/d<coord>"});
        t.basis = take();
        return t;
    }

    void parse_field() {
        RawField f;
        f.name = expect_name("a field name");
        expect_keyword("on");
        f.chart = expect_name("a chart name");
        expect(Tok::Equal);
        f.terms.push_back(parse_vterm(1));
        while (at(Tok::Plus) || at(Tok::Minus))
            f.terms.push_back(parse_vterm(take().kind == Tok::Minus ? -1 : 1));
        fields.push_back(std::move(f));
        note(DeclKind::Field, fields.back().name);
    }

    OpTerm parse_opterm(int sign) {
        OpTerm t;
        t.sign = sign;
        t.coef = parse_raw_expr();
        expect(Tok::Star);
        if (!at(Tok::DBasis)) fail(peek(), "expected a basis vector d/d<coord>", {"d/d<coord>"});
        t.basis.push_back(take());
        while (at(Tok::Star) && peek(1).kind == Tok::DBasis) {
            take();
            t.basis.push_back(take());
        }
        return t;
    }

    void parse_operator() {
        RawOperator o;
        o.name = expect_name("an operator name");
        expect_keyword("on");
        o.chart = expect_name("a chart name");
        expect(Tok::Equal);
        o.terms.push_back(parse_opterm(1));
        while (at(Tok::Plus) || at(Tok::Minus))
            o.terms.push_back(parse_opterm(take().kind == Tok::Minus ? -1 : 1));
        operators.push_back(std::move(o));
        note(DeclKind::Operator, operators.back().name);
    }

    std::vector<Token> comma_list_until_rbracket() {
        std::vector<Token> names;
        expect(Tok::LBracket);
        if (at(Tok::RBracket)) {
            take();
            return names;
        }
        names.push_back(expect_name("a name"));
        while (true) {
            if (at(Tok::RBracket)) {
                take();
                return names;
            }
            if (at(Tok::Comma)) {
                take();
                names.push_back(expect_name("a name"));
                continue;
            }
            fail(peek(), "expected ',' or ']'", {",", "]"});
        }
    }

    void parse_sds() {
        RawSds s;
        s.name = expect_name("an sds name");
        expect_keyword("on");
        s.chart = expect_name("a chart name");
        expect(Tok::Equal);
        s.drift.push_back(expect_name("a drift field name"));
        while (true) {
            if (!at(Tok::Plus)) fail(peek(), "expected '+'", {"+"});
            take();
            if (at(Tok::LBracket)) {
                s.noise = comma_list_until_rbracket();
                break;
            }
            s.drift.push_back(expect_name("a drift field name"));
        }
        sdss.push_back(std::move(s));
        note(DeclKind::SdsRecord, sdss.back().name);
    }

    void parse_action() {
        RawAction a;
        a.name = expect_name("an action name");
        expect_keyword("on");
        a.chart = expect_name("a chart name");
        expect_keyword("generators");
        a.generators = comma_list_until_rbracket();
        actions.push_back(std::move(a));
        note(DeclKind::Action, actions.back().name);
    }

    void parse_map() {
        RawMap m;
        m.name = expect_name("a map name");
        expect(Tok::Colon);
        m.source = expect_name("a source chart name");
        expect(Tok::Arrow);
        m.target = expect_name("a target chart name");
        expect(Tok::LBrace);
        while (true) {
            Token coord = expect_name("a target coordinate");
            expect(Tok::Equal);
            m.components.emplace_back(coord, parse_raw_expr());
            if (at(Tok::Comma)) {
                take();
                continue;
            }
            break;
        }
        expect(Tok::RBrace);
        if (keyword("section")) {
            take();
            m.has_section = true;
            expect(Tok::LBrace);
            while (true) {
                Token coord = expect_name("a source coordinate");
                expect(Tok::Equal);
                m.section.emplace_back(coord, parse_raw_expr());
                if (at(Tok::Comma)) {
                    take();
                    continue;
                }
                break;
            }
            expect(Tok::RBrace);
        }
        maps.push_back(std::move(m));
        note(DeclKind::Map, maps.back().name);
    }

    std::vector<Token> space_list(const char* head) {
        expect_keyword(head);
        expect(Tok::LBracket);
        std::vector<Token> names;
        while (at(Tok::Name)) names.push_back(take());
        expect(Tok::RBracket);
        return names;
    }

    void parse_isys() {
        RawIsys s;
        s.name = expect_name("a system name");
        expect_keyword("on");
        s.chart = expect_name("a chart name");
        expect(Tok::LBrace);
        s.lambdas = space_list("lambda");
        s.zs = space_list("z");
        s.fs = space_list("f");
        expect(Tok::RBrace);
        isystems.push_back(std::move(s));
        note(DeclKind::System, isystems.back().name);
    }

    void note(DeclKind kind, const Token& name) {
        order.emplace_back(kind, name.text);
        spans[str(kind) + " " + name.text] = Span{name.line, name.col};
    }

    void run() {
        while (!at(Tok::End)) {
            const Token& t = peek();
            if (!is_statement_keyword(t)) {
                report(t, "expected a statement (chart, scalar, field, operator, sds, action, "
                          "map or system)");
                take();
                sync();
                continue;
            }
            take();
            try {
                if (t.text == "chart") parse_chart();
                else if (t.text == "scalar") parse_scalar();
                else if (t.text == "field") parse_field();
                else if (t.text == "operator") parse_operator();
                else if (t.text == "sds") parse_sds();
                else if (t.text == "action") parse_action();
                else if (t.text == "map") parse_map();
                else parse_isys();
            } catch (const Bail&) {
                sync();
            }
        }
    }
};

// ---- resolution ----------------------------------------------------------

struct Resolver {
    const Parser& p;
    std::vector<ParseError>& errors;
    const std::vector<std::string>& lines;
    SystemDoc doc;

    Resolver(const Parser& parser, std::vector<ParseError>& errs,
             const std::vector<std::string>& ls)
        : p(parser), errors(errs), lines(ls) {}

    void report(const Token& where, const std::string& msg) {
        ParseError e;
        e.message = msg;
        e.line = where.line;
        e.column = where.col;
        e.excerpt = where.line >= 1 && where.line <= static_cast<int>(lines.size())
                        ? lines[where.line - 1]
                        : "";
        errors.push_back(std::move(e));
    }

    template <typename Map>
    void unresolved(const Token& t, const char* kind, const Map& pool) {
        std::string msg = std::string("unknown ") + kind + " '" + t.text + "'";
        int best_dist = 3;
        std::string best;
        for (const auto& [name, v] : pool) {
            (void)v;
            int d = edit_distance(t.text, name);
            if (d < best_dist || (d == best_dist && !best.empty() && name < best)) {
                best_dist = d;
                best = name;
            }
        }
        if (!best.empty()) msg += "; did you mean '" + best + "'?";
        report(t, msg);
    }

    void unresolved_coord(const Token& t, const Chart& chart) {
        std::map<std::string, int> pool;
        for (const auto& c : chart.coords) pool[c.name] = 1;
        unresolved(t, "coordinate", pool);
    }

    const Chart* chart_of(const Token& name) {
        auto it = doc.charts.find(name.text);
        if (it == doc.charts.end()) {
            unresolved(name, "chart", doc.charts);
            return nullptr;
        }
        return &it->second;
    }

    // every free symbol of the expression must be a coordinate of the chart
    bool check_names(const RawExpr& e, const Chart& chart) {
        bool ok = true;
        for (const auto& t : e.names)
            if (!chart.has_coord(t.text)) {
                unresolved_coord(t, chart);
                ok = false;
            }
        return ok;
    }

    template <typename Decls>
    bool duplicate(const Token& name, const char* kind, const Decls& existing) {
        if (existing.count(name.text)) {
            report(name, std::string("duplicate ") + kind + " '" + name.text + "'");
            return true;
        }
        return false;
    }

    void run() {
        for (const auto& rc : p.charts) {
            if (duplicate(rc.name, "chart", doc.charts)) continue;
            Chart c;
            c.name = rc.name.text;
            for (const auto& raw : rc.coords) {
                CoordSpec spec;
                spec.name = raw.name.text;
                spec.periodic = raw.periodic;
                spec.period = raw.period;
                spec.lower = raw.lower;
                spec.upper = raw.upper;
                c.coords.push_back(std::move(spec));
            }
            doc.charts.emplace(c.name, std::move(c));
        }

        for (const auto& rs : p.scalars) {
            if (duplicate(rs.name, "scalar", doc.scalars)) continue;
            const Chart* chart = chart_of(rs.chart);
            if (!chart) continue;
            if (!check_names(rs.value, *chart)) continue;
            doc.scalars.emplace(rs.name.text, ScalarDecl{rs.chart.text, rs.value.value});
        }

        for (const auto& rf : p.fields) {
            if (duplicate(rf.name, "field", doc.fields)) continue;
            const Chart* chart = chart_of(rf.chart);
            if (!chart) continue;
            bool ok = true;
            VectorField v = VectorField::zero(*chart);
            for (const auto& term : rf.terms) {
                if (!check_names(term.coef, *chart)) ok = false;
                int idx = chart->index_of(term.basis.text);
                if (idx < 0) {
                    unresolved_coord(term.basis, *chart);
                    ok = false;
                    continue;
                }
                Expr c = term.coef.value;
                if (term.sign < 0) c = -c;
                v.comps[idx] += c;
            }
            if (!ok) continue;
            doc.fields.emplace(rf.name.text, FieldDecl{rf.chart.text, std::move(v)});
        }

        for (const auto& ro : p.operators) {
            if (duplicate(ro.name, "operator", doc.operators)) continue;
            const Chart* chart = chart_of(ro.chart);
            if (!chart) continue;
            bool ok = true;
            std::map<std::vector<int>, Expr> coef;
            for (const auto& term : ro.terms) {
                if (!check_names(term.coef, *chart)) ok = false;
                std::vector<int> alpha(chart->dim(), 0);
                bool basis_ok = true;
                for (const auto& b : term.basis) {
                    int idx = chart->index_of(b.text);
                    if (idx < 0) {
                        unresolved_coord(b, *chart);
                        basis_ok = false;
                        break;
                    }
                    ++alpha[idx];
                }
                if (!basis_ok) {
                    ok = false;
                    continue;
                }
                Expr c = term.coef.value;
                if (term.sign < 0) c = -c;
                auto it = coef.find(alpha);
                if (it == coef.end()) coef.emplace(alpha, c);
                else it->second += c;
            }
            if (!ok) continue;
            DiffOp op = DiffOp::zero(*chart);
            for (auto& [alpha, c] : coef) op.set(alpha, c);
            doc.operators.emplace(ro.name.text, OperatorDecl{ro.chart.text, std::move(op)});
        }

        for (const auto& rs : p.sdss) {
            if (duplicate(rs.name, "sds", doc.systems)) continue;
            const Chart* chart = chart_of(rs.chart);
            if (!chart) continue;
            bool ok = true;
            auto pull = [&](const Token& t) -> const VectorField* {
                auto it = doc.fields.find(t.text);
                if (it == doc.fields.end()) {
                    unresolved(t, "field", doc.fields);
                    ok = false;
                    return nullptr;
                }
                if (it->second.chart != rs.chart.text) {
                    report(t, "field '" + t.text + "' lives on chart '" + it->second.chart +
                                  "', not '" + rs.chart.text + "'");
                    ok = false;
                    return nullptr;
                }
                return &it->second.field;
            };
            Sds sys;
            sys.chart = *chart;
            sys.drift = VectorField::zero(*chart);
            SdsDecl decl;
            decl.chart = rs.chart.text;
            for (const auto& t : rs.drift) {
                decl.drift.push_back(t.text);
                if (const VectorField* f = pull(t))
                    for (int j = 0; j < chart->dim(); ++j) sys.drift.comps[j] += f->comps[j];
            }
            for (const auto& t : rs.noise) {
                decl.noise.push_back(t.text);
                if (const VectorField* f = pull(t)) sys.noise.push_back(*f);
            }
            if (!ok) continue;
            decl.system = std::move(sys);
            doc.systems.emplace(rs.name.text, std::move(decl));
        }

        for (const auto& ra : p.actions) {
            if (duplicate(ra.name, "action", doc.actions)) continue;
            const Chart* chart = chart_of(ra.chart);
            if (!chart) continue;
            bool ok = true;
            ActionDecl decl;
            decl.chart = ra.chart.text;
            decl.action.chart = *chart;
            for (const auto& t : ra.generators) {
                decl.generators.push_back(t.text);
                auto it = doc.fields.find(t.text);
                if (it == doc.fields.end()) {
                    unresolved(t, "field", doc.fields);
                    ok = false;
                } else if (it->second.chart != ra.chart.text) {
                    report(t, "field '" + t.text + "' lives on chart '" + it->second.chart +
                                  "', not '" + ra.chart.text + "'");
                    ok = false;
                } else {
                    decl.action.generators.push_back(it->second.field);
                }
            }
            if (!ok) continue;
            doc.actions.emplace(ra.name.text, std::move(decl));
        }

        for (const auto& rm : p.maps) {
            if (duplicate(rm.name, "map", doc.maps)) continue;
            const Chart* src = chart_of(rm.source);
            const Chart* tgt = chart_of(rm.target);
            if (!src || !tgt) continue;
            bool ok = true;
            std::map<std::string, Expr> comps;
            for (const auto& [coord, e] : rm.components) {
                if (!tgt->has_coord(coord.text)) {
                    unresolved_coord(coord, *tgt);
                    ok = false;
                    continue;
                }
                if (comps.count(coord.text)) {
                    report(coord, "coordinate '" + coord.text + "' assigned twice");
                    ok = false;
                    continue;
                }
                if (!check_names(e, *src)) ok = false;
                comps.emplace(coord.text, e.value);
            }
            for (const auto& spec : tgt->coords)
                if (ok && !comps.count(spec.name)) {
                    report(rm.name, "map does not assign target coordinate '" + spec.name + "'");
                    ok = false;
                }
            std::map<std::string, Expr> sect;
            if (rm.has_section) {
                for (const auto& [coord, e] : rm.section) {
                    if (!src->has_coord(coord.text)) {
                        unresolved_coord(coord, *src);
                        ok = false;
                        continue;
                    }
                    if (sect.count(coord.text)) {
                        report(coord, "coordinate '" + coord.text + "' assigned twice");
                        ok = false;
                        continue;
                    }
                    if (!check_names(e, *tgt)) ok = false;
                    sect.emplace(coord.text, e.value);
                }
                for (const auto& spec : src->coords)
                    if (ok && !sect.count(spec.name)) {
                        report(rm.name,
                               "section does not assign source coordinate '" + spec.name + "'");
                        ok = false;
                    }
            }
            if (!ok) continue;
            MapDecl decl;
            decl.source = rm.source.text;
            decl.target = rm.target.text;
            decl.map.source = *src;
            decl.map.target = *tgt;
            for (const auto& spec : tgt->coords) decl.map.components.push_back(comps.at(spec.name));
            if (rm.has_section)
                for (const auto& spec : src->coords) decl.map.section.push_back(sect.at(spec.name));
            doc.maps.emplace(rm.name.text, std::move(decl));
        }

        for (const auto& ri : p.isystems) {
            if (duplicate(ri.name, "system", doc.isystems)) continue;
            const Chart* chart = chart_of(ri.chart);
            if (!chart) continue;
            bool ok = true;
            IsysDecl decl;
            decl.chart = ri.chart.text;
            decl.system.chart = *chart;
            for (const auto& t : ri.lambdas) {
                decl.lambdas.push_back(t.text);
                auto it = doc.operators.find(t.text);
                if (it == doc.operators.end()) {
                    unresolved(t, "operator", doc.operators);
                    ok = false;
                } else if (it->second.chart != ri.chart.text) {
                    report(t, "operator '" + t.text + "' lives on chart '" + it->second.chart +
                                  "', not '" + ri.chart.text + "'");
                    ok = false;
                } else {
                    decl.system.lambdas.push_back(it->second.op);
                }
            }
            for (const auto& t : ri.zs) {
                decl.zs.push_back(t.text);
                auto it = doc.fields.find(t.text);
                if (it == doc.fields.end()) {
                    unresolved(t, "field", doc.fields);
                    ok = false;
                } else if (it->second.chart != ri.chart.text) {
                    report(t, "field '" + t.text + "' lives on chart '" + it->second.chart +
                                  "', not '" + ri.chart.text + "'");
                    ok = false;
                } else {
                    decl.system.zs.push_back(it->second.field);
                }
            }
            for (const auto& t : ri.fs) {
                decl.fs.push_back(t.text);
                auto it = doc.scalars.find(t.text);
                if (it == doc.scalars.end()) {
                    unresolved(t, "scalar", doc.scalars);
                    ok = false;
                } else if (it->second.chart != ri.chart.text) {
                    report(t, "scalar '" + t.text + "' lives on chart '" + it->second.chart +
                                  "', not '" + ri.chart.text + "'");
                    ok = false;
                } else {
                    decl.system.fs.push_back(it->second.value);
                }
            }
            if (!ok) continue;
            doc.isystems.emplace(ri.name.text, std::move(decl));
        }

        doc.order = p.order;
        doc.spans = p.spans;
    }
};

// ---- serialization -------------------------------------------------------

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string expr_text(const Expr& e) {
    if (e.has_ufunc())
        throw std::invalid_argument("serialize: uninterpreted functions have no surface syntax");
    return e.str();
}

// coefficient position in front of '* d/d...': multi-term sums need parens
std::string coef_text(const Expr& e) {
    std::string s = expr_text(e);
    if (e.terms().size() > 1) return "(" + s + ")";
    return s;
}

std::string vexpr_text(const Chart& chart, const std::vector<Expr>& comps) {
    std::string s;
    bool first = true;
    for (int j = 0; j < chart.dim(); ++j) {
        if (comps[j].is_zero_literal()) continue;
        if (!first) s += " + ";
        s += coef_text(comps[j]) + " * d/d" + chart.coords[j].name;
        first = false;
    }
    if (first) s = "0 * d/d" + chart.coords[0].name;
    return s;
}

std::string opexpr_text(const DiffOp& op) {
    std::string s;
    bool first = true;
    for (const auto& [alpha, c] : op.coef) {
        if (!first) s += " + ";
        s += coef_text(c);
        for (size_t j = 0; j < alpha.size(); ++j)
            for (int k = 0; k < alpha[j]; ++k) s += " * d/d" + op.chart.coords[j].name;
        first = false;
    }
    if (first) s = "0 * d/d" + op.chart.coords[0].name;
    return s;
}

std::string chart_text(const Chart& c) {
    std::string s = "chart " + c.name + " { ";
    for (size_t i = 0; i < c.coords.size(); ++i) {
        const CoordSpec& spec = c.coords[i];
        if (i) s += ", ";
        s += spec.name;
        if (spec.periodic) {
            s += " mod " + expr_text(spec.period);
        } else {
            if (spec.lower) s += " > " + fmt_double(*spec.lower);
            if (spec.upper) s += " < " + fmt_double(*spec.upper);
        }
    }
    return s + " }";
}

std::string joined(const std::vector<std::string>& names, const char* sep) {
    std::string s;
    for (size_t i = 0; i < names.size(); ++i) {
        if (i) s += sep;
        s += names[i];
    }
    return s;
}

} // namespace

std::string str(DeclKind k) {
    switch (k) {
        case DeclKind::Chart: return "chart";
        case DeclKind::Scalar: return "scalar";
        case DeclKind::Field: return "field";
        case DeclKind::Operator: return "operator";
        case DeclKind::SdsRecord: return "sds";
        case DeclKind::Action: return "action";
        case DeclKind::Map: return "map";
        case DeclKind::System: return "system";
    }
    return "?";
}

std::string ParseError::str() const {
    std::ostringstream os;
    os << line << ":" << column << ": " << message;
    if (!excerpt.empty()) {
        os << "\n  " << excerpt << "\n  ";
        for (int i = 1; i < column; ++i) os << ' ';
        os << '^';
    }
    return os.str();
}

int edit_distance(const std::string& a, const std::string& b) {
    size_t n = a.size(), m = b.size();
    std::vector<int> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (size_t j = 1; j <= m; ++j) {
            int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

ParseResult parse(const std::string& text) {
    ParseResult result;
    std::vector<std::string> lines = source_lines(text);
    Lexer lex(text, lines);
    lex.run();
    result.errors = std::move(lex.errors);
    Parser parser(lex.toks, lines, result.errors);
    parser.run();
    Resolver resolver(parser, result.errors, lines);
    resolver.run();
    if (result.errors.empty()) result.doc = std::move(resolver.doc);
    return result;
}

std::string serialize(const SystemDoc& doc) {
    std::ostringstream os;
    for (const auto& [kind, name] : doc.order) {
        switch (kind) {
            case DeclKind::Chart:
                os << chart_text(doc.charts.at(name));
                break;
            case DeclKind::Scalar: {
                const ScalarDecl& d = doc.scalars.at(name);
                os << "scalar " << name << " on " << d.chart << " = " << expr_text(d.value);
                break;
            }
            case DeclKind::Field: {
                const FieldDecl& d = doc.fields.at(name);
                os << "field " << name << " on " << d.chart << " = "
                   << vexpr_text(d.field.chart, d.field.comps);
                break;
            }
            case DeclKind::Operator: {
                const OperatorDecl& d = doc.operators.at(name);
                os << "operator " << name << " on " << d.chart << " = " << opexpr_text(d.op);
                break;
            }
            case DeclKind::SdsRecord: {
                const SdsDecl& d = doc.systems.at(name);
                os << "sds " << name << " on " << d.chart << " = " << joined(d.drift, " + ")
                   << " + [" << joined(d.noise, ", ") << "]";
                break;
            }
            case DeclKind::Action: {
                const ActionDecl& d = doc.actions.at(name);
                os << "action " << name << " on " << d.chart << " generators ["
                   << joined(d.generators, ", ") << "]";
                break;
            }
            case DeclKind::Map: {
                const MapDecl& d = doc.maps.at(name);
                os << "map " << name << " : " << d.source << " -> " << d.target << " { ";
                for (int j = 0; j < d.map.target.dim(); ++j) {
                    if (j) os << ", ";
                    os << d.map.target.coords[j].name << " = " << expr_text(d.map.components[j]);
                }
                os << " }";
                if (!d.map.section.empty()) {
                    os << " section { ";
                    for (int j = 0; j < d.map.source.dim(); ++j) {
                        if (j) os << ", ";
                        os << d.map.source.coords[j].name << " = " << expr_text(d.map.section[j]);
                    }
                    os << " }";
                }
                break;
            }
            case DeclKind::System: {
                const IsysDecl& d = doc.isystems.at(name);
                os << "system " << name << " on " << d.chart << " { lambda ["
                   << joined(d.lambdas, " ") << "] z [" << joined(d.zs, " ") << "] f ["
                   << joined(d.fs, " ") << "] }";
                break;
            }
        }
        os << "\n";
    }
    return os.str();
}

namespace {

bool chart_equal(const Chart& a, const Chart& b) {
    if (a.name != b.name || a.dim() != b.dim()) return false;
    for (int j = 0; j < a.dim(); ++j) {
        const CoordSpec& x = a.coords[j];
        const CoordSpec& y = b.coords[j];
        if (x.name != y.name || x.periodic != y.periodic) return false;
        if (x.periodic && x.period != y.period) return false;
        if (x.lower != y.lower || x.upper != y.upper) return false;
    }
    return true;
}

bool exprs_equal(const std::vector<Expr>& a, const std::vector<Expr>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

template <typename M, typename F>
bool maps_equal(const M& a, const M& b, F&& eq) {
    if (a.size() != b.size()) return false;
    for (const auto& [name, va] : a) {
        auto it = b.find(name);
        if (it == b.end() || !eq(va, it->second)) return false;
    }
    return true;
}

} // namespace

bool structurally_equal(const SystemDoc& a, const SystemDoc& b) {
    if (a.order != b.order) return false;
    if (!maps_equal(a.charts, b.charts, chart_equal)) return false;
    if (!maps_equal(a.scalars, b.scalars, [](const ScalarDecl& x, const ScalarDecl& y) {
            return x.chart == y.chart && x.value == y.value;
        }))
        return false;
    if (!maps_equal(a.fields, b.fields, [](const FieldDecl& x, const FieldDecl& y) {
            return x.chart == y.chart && exprs_equal(x.field.comps, y.field.comps);
        }))
        return false;
    if (!maps_equal(a.operators, b.operators, [](const OperatorDecl& x, const OperatorDecl& y) {
            if (x.chart != y.chart || x.op.coef.size() != y.op.coef.size()) return false;
            for (const auto& [alpha, c] : x.op.coef) {
                auto it = y.op.coef.find(alpha);
                if (it == y.op.coef.end() || !(it->second == c)) return false;
            }
            return true;
        }))
        return false;
    if (!maps_equal(a.systems, b.systems, [](const SdsDecl& x, const SdsDecl& y) {
            return x.chart == y.chart && x.drift == y.drift && x.noise == y.noise;
        }))
        return false;
    if (!maps_equal(a.actions, b.actions, [](const ActionDecl& x, const ActionDecl& y) {
            return x.chart == y.chart && x.generators == y.generators;
        }))
        return false;
    if (!maps_equal(a.maps, b.maps, [](const MapDecl& x, const MapDecl& y) {
            return x.source == y.source && x.target == y.target &&
                   exprs_equal(x.map.components, y.map.components) &&
                   exprs_equal(x.map.section, y.map.section);
        }))
        return false;
    if (!maps_equal(a.isystems, b.isystems, [](const IsysDecl& x, const IsysDecl& y) {
            return x.chart == y.chart && x.lambdas == y.lambdas && x.zs == y.zs && x.fs == y.fs;
        }))
        return false;
    return true;
}

// ---- random documents ----------------------------------------------------

namespace {

struct DocRng {
    std::mt19937_64 rng;
    int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    bool chance(double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }
};

Expr random_expr(const std::vector<std::string>& coords, DocRng& r) {
    int terms = r.pick(1, 3);
    Expr e;
    for (int t = 0; t < terms; ++t) {
        Expr term = Expr::rational(Rational(r.pick(-4, 4), r.pick(1, 3)));
        for (const auto& c : coords)
            if (r.chance(0.4)) term = term * Expr::symbol(c).pow(r.pick(1, 2));
        if (!coords.empty() && r.chance(0.25)) {
            Expr arg = Expr::symbol(coords[r.pick(0, static_cast<int>(coords.size()) - 1)]);
            switch (r.pick(0, 3)) {
                case 0: term = term * sin(arg); break;
                case 1: term = term * cos(arg); break;
                case 2: term = term * exp(arg); break;
                default: term = term * sqrt(arg); break;
            }
        }
        e += term;
    }
    if (e.is_zero_literal()) e = Expr::integer(1);
    return e;
}

} // namespace

SystemDoc random_document(std::uint64_t seed) {
    DocRng r{std::mt19937_64(seed)};
    SystemDoc doc;

    const std::vector<std::string> coord_pool = {"x", "y", "z", "u", "v", "w", "s", "t1"};
    const std::vector<std::string> chart_pool = {"M", "N", "P"};
    int nch = r.pick(1, 2);
    std::vector<std::string> chart_names;
    for (int i = 0; i < nch; ++i) {
        Chart c;
        c.name = chart_pool[i];
        int dim = r.pick(1, 3);
        std::vector<std::string> avail = coord_pool;
        for (int j = 0; j < dim; ++j) {
            CoordSpec spec;
            int k = r.pick(0, static_cast<int>(avail.size()) - 1);
            spec.name = avail[k];
            avail.erase(avail.begin() + k);
            int kind = r.pick(0, 4);
            if (kind == 0) {
                spec.periodic = true;
                spec.period = r.chance(0.5) ? Expr::integer(2) * Expr::pi() : Expr::integer(1);
            } else if (kind == 1) {
                spec.lower = static_cast<double>(r.pick(-2, 1));
            } else if (kind == 2) {
                spec.lower = 0.0;
                spec.upper = static_cast<double>(r.pick(1, 4));
            }
            c.coords.push_back(std::move(spec));
        }
        chart_names.push_back(c.name);
        doc.order.emplace_back(DeclKind::Chart, c.name);
        doc.charts.emplace(c.name, std::move(c));
    }

    int scalar_n = 0, field_n = 0, op_n = 0;
    std::map<std::string, std::vector<std::string>> fields_on, scalars_on, ops_on;
    for (const auto& cn : chart_names) {
        const Chart& chart = doc.charts.at(cn);
        std::vector<std::string> coords = chart.coord_names();

        int ns = r.pick(0, 2);
        for (int i = 0; i < ns; ++i) {
            std::string name = "F" + std::to_string(++scalar_n);
            doc.scalars.emplace(name, ScalarDecl{cn, random_expr(coords, r)});
            doc.order.emplace_back(DeclKind::Scalar, name);
            scalars_on[cn].push_back(name);
        }

        int nf = r.pick(1, 3);
        for (int i = 0; i < nf; ++i) {
            std::string name = "X" + std::to_string(++field_n);
            VectorField v = VectorField::zero(chart);
            bool any = false;
            for (int j = 0; j < chart.dim(); ++j)
                if (r.chance(0.7)) {
                    v.comps[j] = random_expr(coords, r);
                    any = true;
                }
            if (!any) v.comps[0] = Expr::integer(1);
            doc.fields.emplace(name, FieldDecl{cn, std::move(v)});
            doc.order.emplace_back(DeclKind::Field, name);
            fields_on[cn].push_back(name);
        }

        if (r.chance(0.5)) {
            std::string name = "L" + std::to_string(++op_n);
            DiffOp op = DiffOp::zero(chart);
            int nt = r.pick(1, 3);
            for (int t = 0; t < nt; ++t) {
                std::vector<int> alpha(chart.dim(), 0);
                alpha[r.pick(0, chart.dim() - 1)] += 1;
                if (r.chance(0.6)) alpha[r.pick(0, chart.dim() - 1)] += 1;
                op.set(alpha, op.coefficient(alpha) + random_expr(coords, r));
            }
            if (op.is_zero()) {
                std::vector<int> alpha(chart.dim(), 0);
                alpha[0] = 1;
                op.set(alpha, Expr::integer(1));
            }
            doc.operators.emplace(name, OperatorDecl{cn, std::move(op)});
            doc.order.emplace_back(DeclKind::Operator, name);
            ops_on[cn].push_back(name);
        }
    }

    int sds_n = 0, act_n = 0, map_n = 0, sys_n = 0;
    for (const auto& cn : chart_names) {
        const Chart& chart = doc.charts.at(cn);
        const auto& pool = fields_on[cn];
        if (!pool.empty() && r.chance(0.7)) {
            std::string name = "S" + std::to_string(++sds_n);
            SdsDecl decl;
            decl.chart = cn;
            decl.system.chart = chart;
            decl.system.drift = VectorField::zero(chart);
            int nd = r.pick(1, std::min<int>(2, static_cast<int>(pool.size())));
            for (int i = 0; i < nd; ++i) {
                decl.drift.push_back(pool[i]);
                const VectorField& f = doc.fields.at(pool[i]).field;
                for (int j = 0; j < chart.dim(); ++j) decl.system.drift.comps[j] += f.comps[j];
            }
            int nn = r.pick(0, static_cast<int>(pool.size()) - nd);
            for (int i = 0; i < nn; ++i) {
                decl.noise.push_back(pool[nd + i]);
                decl.system.noise.push_back(doc.fields.at(pool[nd + i]).field);
            }
            doc.systems.emplace(name, std::move(decl));
            doc.order.emplace_back(DeclKind::SdsRecord, name);
        }
        if (!pool.empty() && r.chance(0.4)) {
            std::string name = "G" + std::to_string(++act_n);
            ActionDecl decl;
            decl.chart = cn;
            decl.action.chart = chart;
            decl.generators.push_back(pool[0]);
            decl.action.generators.push_back(doc.fields.at(pool[0]).field);
            doc.actions.emplace(name, std::move(decl));
            doc.order.emplace_back(DeclKind::Action, name);
        }
        if (r.chance(0.5)) {
            std::string name = "Y" + std::to_string(++sys_n);
            IsysDecl decl;
            decl.chart = cn;
            decl.system.chart = chart;
            for (const auto& on : ops_on[cn]) {
                decl.lambdas.push_back(on);
                decl.system.lambdas.push_back(doc.operators.at(on).op);
            }
            if (!pool.empty()) {
                decl.zs.push_back(pool[0]);
                decl.system.zs.push_back(doc.fields.at(pool[0]).field);
            }
            for (const auto& sn : scalars_on[cn]) {
                decl.fs.push_back(sn);
                decl.system.fs.push_back(doc.scalars.at(sn).value);
            }
            doc.isystems.emplace(name, std::move(decl));
            doc.order.emplace_back(DeclKind::System, name);
        }
    }

    if (chart_names.size() >= 2 && r.chance(0.8)) {
        std::string name = "phi" + std::to_string(++map_n);
        const Chart& src = doc.charts.at(chart_names[0]);
        const Chart& tgt = doc.charts.at(chart_names[1]);
        MapDecl decl;
        decl.source = src.name;
        decl.target = tgt.name;
        decl.map.source = src;
        decl.map.target = tgt;
        std::vector<std::string> scoords = src.coord_names();
        std::vector<std::string> tcoords = tgt.coord_names();
        for (int j = 0; j < tgt.dim(); ++j) decl.map.components.push_back(random_expr(scoords, r));
        if (r.chance(0.5))
            for (int j = 0; j < src.dim(); ++j) decl.map.section.push_back(random_expr(tcoords, r));
        doc.maps.emplace(name, std::move(decl));
        doc.order.emplace_back(DeclKind::Map, name);
    }

    for (const auto& [kind, name] : doc.order) doc.spans[str(kind) + " " + name] = Span{};
    return doc;
}

} // namespace sds
