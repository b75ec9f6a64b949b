// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bnnv/network.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace bnnv {

/// Parses a network document. `origin` is used to prefix error messages.
Network network_from_json(const nlohmann::json &doc, const std::string &origin = "<network>");
nlohmann::json network_to_json(const Network &net);

Network load_network(const std::filesystem::path &path);

/// Reads and parses a JSON file; syntax errors report file, line and column.
nlohmann::json read_json_file(const std::filesystem::path &path);

namespace json_detail {

// Typed accessors raising ParseError with "<origin>: <field path>: <problem>".
const nlohmann::json &member(const nlohmann::json &obj, const char *key, const std::string &origin,
                             const std::string &path);
double number(const nlohmann::json &value, const std::string &origin, const std::string &path);
/// Like `number`, but null means an infinite bound with the given sign.
double bound(const nlohmann::json &value, double infinity, const std::string &origin, const std::string &path);
std::size_t unsigned_integer(const nlohmann::json &value, const std::string &origin, const std::string &path);
const nlohmann::json &array(const nlohmann::json &value, const std::string &origin, const std::string &path);

} // namespace json_detail

} // namespace bnnv
