#include "ionchain/species_registry.hpp"

#include <fstream>
#include <sstream>

#include "ionchain/errors.hpp"

namespace ionchain {

SpeciesRegistry::SpeciesRegistry() {
    add(make_species("Ca40", 40.0, 1));
}

void SpeciesRegistry::add(IonSpecies species) {
    species_[species.name] = std::move(species);
}

void SpeciesRegistry::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DomainError("species registry: cannot open '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string name;
        if (!(ss >> name)) continue;  // blank line
        double mass_amu = 0.0;
        int charge_e = 0;
        if (!(ss >> mass_amu >> charge_e))
            throw DomainError("species registry: parse error at " + path + ":" +
                              std::to_string(lineno));
        add(make_species(name, mass_amu, charge_e));
    }
}

const IonSpecies& SpeciesRegistry::get(const std::string& name) const {
    const auto it = species_.find(name);
    if (it == species_.end())
        throw DomainError("unknown species '" + name + "'");
    return it->second;
}

bool SpeciesRegistry::contains(const std::string& name) const {
    return species_.count(name) != 0;
}

std::vector<std::string> SpeciesRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(species_.size());
    for (const auto& [name, _] : species_) out.push_back(name);
    return out;
}

}  // namespace ionchain
