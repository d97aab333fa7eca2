#ifndef IONCHAIN_SPECIES_REGISTRY_HPP
#define IONCHAIN_SPECIES_REGISTRY_HPP

#include <map>
#include <string>
#include <vector>

#include "ionchain/units.hpp"

namespace ionchain {

// Named species lookup. Ca40 (40 amu, +1e) is always present; entries loaded
// from a config file add to or override the built-ins.
//
// Config format, one species per line:
//   # comment
//   <name> <mass_amu> <charge_e>
class SpeciesRegistry {
public:
    SpeciesRegistry();

    void load_file(const std::string& path);
    void add(IonSpecies species);

    // Throws DomainError if the name is unknown.
    const IonSpecies& get(const std::string& name) const;
    bool contains(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, IonSpecies> species_;
};

}  // namespace ionchain

#endif
