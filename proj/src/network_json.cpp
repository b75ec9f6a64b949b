// SPDX-License-Identifier: Apache-2.0
#include "bnnv/network_json.hpp"

#include "bnnv/error.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace bnnv {

using nlohmann::json;

namespace json_detail {

namespace {

[[noreturn]] void fail(const std::string &origin, const std::string &path, const std::string &problem)
{
    throw ParseError(origin + ": field '" + path + "': " + problem);
}

} // namespace

const json &member(const json &obj, const char *key, const std::string &origin, const std::string &path)
{
    if ( !obj.is_object() )
        fail(origin, path, "expected an object");
    auto it = obj.find(key);
    if ( it == obj.end() )
        fail(origin, path.empty() ? key : path + "." + key, "missing");
    return *it;
}

double number(const json &value, const std::string &origin, const std::string &path)
{
    if ( !value.is_number() )
        fail(origin, path, "expected a number, got " + std::string(value.type_name()));
    return value.get<double>();
}

double bound(const json &value, double infinity, const std::string &origin, const std::string &path)
{
    if ( value.is_null() )
        return infinity;
    return number(value, origin, path);
}

std::size_t unsigned_integer(const json &value, const std::string &origin, const std::string &path)
{
    if ( value.is_number_unsigned() )
        return value.get<std::size_t>();
    if ( value.is_number_integer() )
        fail(origin, path, "expected a non-negative integer");
    if ( value.is_number_float() )
    {
        double d = value.get<double>();
        if ( d >= 0 && std::floor(d) == d )
            return static_cast<std::size_t>(d);
    }
    fail(origin, path, "expected a non-negative integer, got " + std::string(value.type_name()));
}

const json &array(const json &value, const std::string &origin, const std::string &path)
{
    if ( !value.is_array() )
        fail(origin, path, "expected an array, got " + std::string(value.type_name()));
    return value;
}

} // namespace json_detail

using namespace json_detail;

Network network_from_json(const json &doc, const std::string &origin)
{
    Network net;
    if ( !doc.is_object() )
        throw ParseError(origin + ": top level must be an object");
    if ( auto it = doc.find("metadata"); it != doc.end() )
        net.metadata = it->is_string() ? it->get<std::string>() : it->dump();

    const json &layers = array(member(doc, "layers", origin, ""), origin, "layers");
    for ( std::size_t i = 0; i < layers.size(); ++i )
    {
        const std::string path = "layers[" + std::to_string(i) + "]";
        const json &entry = layers[i];
        const json &kind_value = member(entry, "kind", origin, path);
        if ( !kind_value.is_string() )
            throw ParseError(origin + ": field '" + path + ".kind': expected a string");
        const std::string kind = kind_value.get<std::string>();
        const std::size_t size = unsigned_integer(member(entry, "size", origin, path), origin, path + ".size");

        if ( kind == "input" )
            net.layers.push_back(Layer::input(size));
        else if ( kind == "relu" )
            net.layers.push_back(Layer::relu(size));
        else if ( kind == "sign" )
            net.layers.push_back(Layer::sign(size));
        else if ( kind == "weighted_sum" )
        {
            const json &w = array(member(entry, "weights", origin, path), origin, path + ".weights");
            const json &b = array(member(entry, "biases", origin, path), origin, path + ".biases");
            std::vector<std::vector<double>> weights;
            for ( std::size_t r = 0; r < w.size(); ++r )
            {
                const std::string row_path = path + ".weights[" + std::to_string(r) + "]";
                const json &row = array(w[r], origin, row_path);
                std::vector<double> values;
                for ( std::size_t c = 0; c < row.size(); ++c )
                    values.push_back(number(row[c], origin, row_path + "[" + std::to_string(c) + "]"));
                weights.push_back(std::move(values));
            }
            std::vector<double> biases;
            for ( std::size_t r = 0; r < b.size(); ++r )
                biases.push_back(number(b[r], origin, path + ".biases[" + std::to_string(r) + "]"));
            Layer layer = Layer::weighted_sum(std::move(weights), std::move(biases));
            layer.size = size;
            net.layers.push_back(std::move(layer));
        }
        else if ( kind == "max" )
        {
            const json &s = array(member(entry, "sources", origin, path), origin, path + ".sources");
            std::vector<std::vector<std::size_t>> sources;
            for ( std::size_t n = 0; n < s.size(); ++n )
            {
                const std::string list_path = path + ".sources[" + std::to_string(n) + "]";
                const json &list = array(s[n], origin, list_path);
                std::vector<std::size_t> indices;
                for ( std::size_t k = 0; k < list.size(); ++k )
                    indices.push_back(unsigned_integer(list[k], origin, list_path + "[" + std::to_string(k) + "]"));
                sources.push_back(std::move(indices));
            }
            Layer layer = Layer::max(std::move(sources));
            layer.size = size;
            net.layers.push_back(std::move(layer));
        }
        else
            throw ParseError(origin + ": field '" + path + ".kind': unknown layer kind '" + kind + "'");
    }

    auto violations = validate(net);
    if ( !violations.empty() )
    {
        std::string message = origin + ": invalid network:";
        for ( const auto &v : violations )
            message += "\n  layer " + std::to_string(v.layer) + ": " + v.message;
        throw ParseError(message);
    }
    return net;
}

json network_to_json(const Network &net)
{
    json layers = json::array();
    for ( const Layer &layer : net.layers )
    {
        json entry = { { "kind", std::string(to_string(layer.kind)) }, { "size", layer.size } };
        if ( layer.kind == LayerKind::WeightedSum )
        {
            entry["weights"] = layer.weights;
            entry["biases"] = layer.biases;
        }
        else if ( layer.kind == LayerKind::Max )
            entry["sources"] = layer.sources;
        layers.push_back(std::move(entry));
    }
    json doc = { { "layers", std::move(layers) } };
    if ( !net.metadata.empty() )
        doc["metadata"] = net.metadata;
    return doc;
}

json read_json_file(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if ( !in )
        throw ParseError(path.string() + ": cannot open file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    try
    {
        return json::parse(text);
    }
    catch ( const json::parse_error &e )
    {
        // e.byte is 1-based and points just past the offending character.
        std::size_t line = 1;
        std::size_t column = 1;
        const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        for ( std::size_t i = 0; i < end; ++i )
        {
            if ( text[i] == '\n' )
            {
                ++line;
                column = 1;
            }
            else
                ++column;
        }
        throw ParseError(path.string() + ":" + std::to_string(line) + ":" + std::to_string(column) +
                         ": JSON syntax error: " + e.what());
    }
}

Network load_network(const std::filesystem::path &path)
{
    return network_from_json(read_json_file(path), path.string());
}

} // namespace bnnv
