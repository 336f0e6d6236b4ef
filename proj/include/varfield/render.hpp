// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "varfield/expr.hpp"
#include "varfield/forms.hpp"
#include "varfield/jet.hpp"

namespace varfield {

enum class OutputFormat { Plain, Latex, Json };

/// "plain", "latex" or "json"; std::invalid_argument otherwise.
OutputFormat parse_format(const std::string& name);

/// Plain output is accepted back by parse_expression for the same chart.
std::string render_expr(const Expr& e, const JetContext& ctx, OutputFormat fmt = OutputFormat::Plain);

/// Renders a form; contact factors are listed before dx factors.
std::string render_form(const Form& rho, const JetContext& ctx, OutputFormat fmt = OutputFormat::Plain);

/// Renders a horizontal (n-1)-form through its components along ds_i.
std::string render_current(const Form& current, const JetContext& ctx, OutputFormat fmt = OutputFormat::Plain);

/// Round trip through the JSON document produced with OutputFormat::Json.
Expr expr_from_json(const std::string& text);
Form form_from_json(const std::string& text);

}  // namespace varfield
