// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "varfield/expr.hpp"
#include "varfield/forms.hpp"
#include "varfield/jet.hpp"

namespace varfield {

class ParseError : public std::runtime_error {
public:
    ParseError(int line, int column, const std::string& message);
    [[nodiscard]] int line() const noexcept { return line_; }
    [[nodiscard]] int column() const noexcept { return column_; }
    [[nodiscard]] const std::string& message() const noexcept { return message_; }

private:
    int line_;
    int column_;
    std::string message_;
};

/// Expression-valued array over named free indices, stored row-major in the
/// order of `indices`.
struct IndexedTensor {
    std::vector<std::string> indices;
    std::vector<int> ranges;
    std::vector<Expr> data;

    [[nodiscard]] bool is_scalar() const { return indices.empty(); }
    [[nodiscard]] std::size_t flat(const std::vector<int>& values) const;  ///< 0-based values
    [[nodiscard]] const Expr& at(const std::vector<int>& values) const { return data.at(flat(values)); }
    [[nodiscard]] const Expr& scalar() const;
};

enum class Symmetry { None, Symmetric, Antisymmetric };

struct FieldDecl {
    std::string name;
    std::vector<int> ranges;  ///< empty for a single component
    int offset = 0;           ///< first fiber coordinate
    [[nodiscard]] int size() const;
    /// Fiber coordinate of the component with 0-based slot values (row-major).
    [[nodiscard]] int coordinate(const std::vector<int>& values) const;
};

struct ConstDecl {
    std::string name;
    std::vector<int> ranges;
    Symmetry symmetry = Symmetry::None;
    std::vector<Rational> values;  ///< row-major
};

struct ParamDecl {
    std::string name;
    std::vector<int> ranges;
    /// Registry name of the component with 0-based slot values.
    [[nodiscard]] std::string component_name(const std::vector<int>& values) const;
};

/// A parsed field theory: base dimension, fields, constants, the Lagrangian
/// and named vector fields and sections.
///
/// Fiber coordinates enumerate fields in declaration order, each field
/// row-major over its slots (for w[A, mu]: A-major, then mu).
struct ModelSpec {
    int n = 1;
    std::vector<FieldDecl> fields;
    std::map<std::string, ConstDecl> constants;
    std::map<std::string, ParamDecl> params;
    std::map<std::string, IndexedTensor> defs;
    std::optional<Expr> lagrangian;
    std::map<std::string, VecField> vecfields;
    std::map<std::string, Section> sections;

    [[nodiscard]] int m() const;
    /// Chart with display names ("x" or "x1".., "y", "w[1,2]", ...).
    [[nodiscard]] JetContext context() const;
    /// L ds; throws if the model has no Lagrangian.
    [[nodiscard]] Form lagrangian_form() const;
    [[nodiscard]] const IndexedTensor& def(const std::string& name) const;
    [[nodiscard]] const VecField& vecfield(const std::string& name) const;
    [[nodiscard]] const Section& section(const std::string& name) const;
    [[nodiscard]] const FieldDecl& field(const std::string& name) const;

    /// Model with the default chart names of ctx, one scalar field per fiber coordinate.
    static ModelSpec from_context(const JetContext& ctx);
};

/// Parses the line-oriented model language (see docs/dsl.md).
ModelSpec parse_model(const std::string& text);
/// Reads and parses a model file; std::runtime_error naming the path when unreadable.
ModelSpec load_model(const std::string& path);

/// Parses one scalar expression against a model's symbols.
Expr parse_expression(const std::string& text, const ModelSpec& model);
/// Parses an indexed expression; free indices become tensor slots.
IndexedTensor parse_indexed(const std::string& text, const ModelSpec& model);

}  // namespace varfield
