// Library usage: droplet of unit mass for n = 2, printed on a coarse grid.

#include <cstdio>

#include "droplet/local_expansion.hpp"
#include "droplet/ode_shooter.hpp"
#include "droplet/params.hpp"
#include "droplet/reconstruct.hpp"

int main()
{
    const droplet::params p = droplet::derive_params(2.0, 1.0);
    const droplet::ubar u = droplet::compute_ubar(p, 12);
    const droplet::shoot_result s = droplet::find_mu_bar(p, u, {}, 400);
    const droplet::physical_profile prof = droplet::physical_profile_from(p, s);

    std::printf("mu_bar = %.12g  b_bar = %.12g  a = %.12g  mass = %.9f\n", s.mu_bar, s.b_bar, prof.a,
                prof.mass_check);
    for (int i = 0; i <= 10; ++i) {
        const double y = -prof.a + 2.0 * prof.a * i / 10.0;
        std::printf("%10.6f %12.8f\n", y, prof(y));
    }
    for (double t : {0.5, 1.0, 2.0}) {
        std::printf("t = %.1f  contact line = %.8f  mass = %.9f\n", t, droplet::contact_line(prof, t),
                    droplet::self_similar_mass(prof, t));
    }
}
