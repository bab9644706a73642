#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sds/integrability.hpp"
#include "sds/reduction.hpp"

namespace sds {

// Textual definition language for charts, scalars, fields, SDS records,
// actions, operators, quotient maps and integrable systems.  One statement
// per definition, newline-insensitive, '#' starts a line comment.  The
// token `d/d<coord>` is reserved for basis vectors, so `d` is not usable
// as a symbol name.
//
//   chart P { theta mod 2*pi, r > 0 }
//   scalar R on P = r
//   field Zt on P = 1 * d/dtheta
//   operator L on P = 1/2 * d/dr*d/dr + 1/2*r^-1 * d/dr
//   sds X on M = Xh + D + [B1, B2]
//   action so2 on M generators [Xh]
//   map pol : P -> M { x = r*cos(theta), y = r*sin(theta) } section { ... }
//   system S on P { lambda [L] z [Zt] f [] }

struct Span {
    int line = 1;
    int column = 1;
};

struct ParseError {
    std::string message;
    int line = 1;
    int column = 1;
    std::string excerpt;                // the source line the error points into
    std::vector<std::string> expected;  // token spellings, possibly empty

    std::string str() const;  // "line:col: message" plus excerpt and caret
};

struct ScalarDecl {
    std::string chart;
    Expr value;
};

struct FieldDecl {
    std::string chart;
    VectorField field;
};

struct OperatorDecl {
    std::string chart;
    DiffOp op;
};

struct SdsDecl {
    std::string chart;
    std::vector<std::string> drift;  // summed field names
    std::vector<std::string> noise;
    Sds system;
};

struct ActionDecl {
    std::string chart;
    std::vector<std::string> generators;
    GroupAction action;
};

struct MapDecl {
    std::string source;
    std::string target;
    QuotientMap map;
};

struct IsysDecl {
    std::string chart;
    std::vector<std::string> lambdas, zs, fs;
    IntegrableSystem system;
};

enum class DeclKind { Chart, Scalar, Field, Operator, SdsRecord, Action, Map, System };
std::string str(DeclKind k);

struct SystemDoc {
    std::map<std::string, Chart> charts;
    std::map<std::string, ScalarDecl> scalars;
    std::map<std::string, FieldDecl> fields;
    std::map<std::string, OperatorDecl> operators;
    std::map<std::string, SdsDecl> systems;
    std::map<std::string, ActionDecl> actions;
    std::map<std::string, MapDecl> maps;
    std::map<std::string, IsysDecl> isystems;

    std::vector<std::pair<DeclKind, std::string>> order;  // definition order
    std::map<std::string, Span> spans;                    // "<kind> <name>" -> span
};

struct ParseResult {
    std::optional<SystemDoc> doc;  // absent whenever errors is nonempty
    std::vector<ParseError> errors;

    bool ok() const { return doc.has_value() && errors.empty(); }
};

// Either a fully resolved document or every diagnosable error; recovery
// happens at statement boundaries.  Unresolved names carry a closest-match
// suggestion when one sits within edit distance 2.
ParseResult parse(const std::string& text);

// Canonical rendering; parse(serialize(doc)) is structurally equal to doc.
// Throws on expressions containing uninterpreted functions, which have no
// surface syntax.
std::string serialize(const SystemDoc& doc);

// Equality up to spans: same definitions in the same order with equal
// resolved content.
bool structurally_equal(const SystemDoc& a, const SystemDoc& b);

// Seeded generator of valid documents; test fodder for the round-trip law.
SystemDoc random_document(std::uint64_t seed);

int edit_distance(const std::string& a, const std::string& b);

} // namespace sds
