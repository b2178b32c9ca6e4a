#pragma once

// Reference values produced by tests/oracles/compute_fixtures.py (scipy root
// finders and a water-filling inner solve, cross-checked with a conic QP
// solver). Regenerate with that script; do not edit by hand.

#include <array>

namespace netopt::fixtures {

// Rate control, reference system: 11 users, gamma_n = 0.14 + 0.06 n,
// p_n = 1.4 + 0.6 n, C = 10.
inline constexpr double rate_base = 0.4911104256068033;
inline constexpr double rate_c9 = 0.5240988074536037;
inline constexpr double rate_c12 = 0.4393659202629255;
inline constexpr double rate_leave_user1 = 0.43048327804168124;
inline constexpr double rate_join_user12_after_leave = 0.4715940082805594;
inline constexpr double rate_p_x1_2 = 0.45812572111229966;
inline constexpr double rate_p_x0_84 = 0.5255892112452909;
inline constexpr double rate_toy_c4_1 = 0.49386479832479474;

// Service allocation, reference system: 11 users, 5 states, f uniform,
// A_n = 1.8 + 0.2 n, V = 100.
inline constexpr std::array<double, 11> service_base = {
    3812.468793785077,  3749.9750350280615, 3708.3125291900515, 3766.215563017812,
    3827.1554220677153, 3910.2494539884115, 4020.264033586998,  4162.468793785078,
    4029.975035028062,  3941.645862523385,  4016.2155630178117};
inline constexpr double service_base_optimum = 647.9102110219904;

inline constexpr std::array<double, 11> service_a_x1_3 = {
    4956.209431920603, 4874.967545536482, 4820.806287947069, 4896.080231923157,
    4975.302048688032, 5083.324290184936, 5226.3432436631,   5411.209431920603,
    5238.967545536482, 5124.139621280402, 5221.080231923157};
inline constexpr double service_a_x1_3_optimum = 1094.9682566271629;

// User 11 removed.
inline constexpr std::array<double, 10> service_leave_user11 = {
    3415.697065256077,  3352.557652204861,  3310.464710170718,  3358.1760144648374,
    3424.0113419423747, 3511.4297159458224, 3624.119982109917,  3765.6970652560776,
    3632.557652204861,  3543.7980435040504};

// Users 1..10 plus user 12 with A = 5.
inline constexpr std::array<double, 11> service_join_user12 = {
    3905.9809168715183, 3844.784733497215,  3803.987277914345, 3860.588863534963,
    3940.498117821151,  4017.773344206581,  4121.142976564634, 4255.980916871518,
    4124.784733497215,  4037.3206112476787, 4363.575040898074};

// f = [0.5, 0.5, 0, 0, 0].
inline constexpr std::array<double, 11> service_f_first_two = {
    4105.779272010991,  3932.69948000785,  3836.5440400061057, 3775.3542145504493,
    3732.992027696534,  3701.9264240036628, 3922.6621839670206, 4665.779272010991,
    4332.69948000785,   4147.6551511172165, 4029.899669095904};

// f = [0, 0, 0.2, 0.4, 0.4].
inline constexpr std::array<double, 11> service_f_last_three = {
    3683.4638544604295, 3653.8729101926187, 3632.501672665866, 3788.21389057508,
    4075.995770812049,  4235.628763498198,  4060.4790579033897, 3952.694623691199,
    3879.6793618055212, 3826.94611711031,   4047.473149834339};

}  // namespace netopt::fixtures
