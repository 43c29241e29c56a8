#pragma once

// INI-style configuration: one section per module, flat key = value pairs.
// The same encoding is used for run manifests, so a manifest can be fed back
// as a config file.

#include "padc/dataset.hpp"
#include "padc/frontend.hpp"
#include "padc/nets.hpp"
#include "padc/training.hpp"

#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace padc::config {

using Tree = boost::property_tree::ptree;

// Shortest text that parses back to the identical double.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& key);

// Section writers. Each writes every field, defaults included.
Tree frontend_section(const frontend::FrontEndConfig& cfg);
Tree corpus_section(const dataset::CorpusConfig& cfg);
Tree net_section(const nets::NetSpec& spec);
Tree train_section(const training::TrainConfig& cfg);

// Section readers apply the keys present in `section` on top of `base` and
// reject unknown keys. A "preset" key in the frontend section replaces the
// base with that preset before other keys are applied.
frontend::FrontEndConfig read_frontend(const Tree& section, frontend::FrontEndConfig base);
dataset::CorpusConfig read_corpus(const Tree& section, dataset::CorpusConfig base);
nets::NetSpec read_net(const Tree& section, nets::NetSpec base);
training::TrainConfig read_train(const Tree& section, training::TrainConfig base);

Tree read_ini(const std::filesystem::path& path);
void write_ini(const Tree& tree, std::ostream& out);
void write_ini(const Tree& tree, const std::filesystem::path& path);

// FNV-1a digest of the tree's INI text.
std::uint64_t fingerprint(const Tree& tree);
std::string hex64(std::uint64_t v);

// Child section or an empty tree.
const Tree& section(const Tree& tree, const std::string& name);

} // namespace padc::config
