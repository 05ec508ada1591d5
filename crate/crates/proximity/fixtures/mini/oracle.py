"""Independent reference for the MINI fixture.

Brute-force haversine with Python's math module; writes the expected
report files under expected/. Run from this directory:

    python3 oracle.py
"""
import csv, math

R = 3958.7613
GROUPS = ['all_adults', 'households_low_income', 'households_high_income', 'pop_black', 'pop_white',
          'pop_aapi', 'pop_other', 'pop_hispanic', 'pop_non_hispanic']
FIELD = {'all_adults': 'adults_total', 'households_low_income': 'hh_lt_35k', 'households_high_income': 'hh_gt_100k'}
TH = [1.0, 2.0, 5.0]


def hav(a, b):
    la1, lo1 = map(math.radians, a)
    la2, lo2 = map(math.radians, b)
    h = math.sin((la2 - la1) / 2) ** 2 + math.cos(la1) * math.cos(la2) * math.sin((lo2 - lo1) / 2) ** 2
    return 2 * R * math.asin(math.sqrt(h))


def ok_counts(r):
    c = {k: int(v) for k, v in r.items() if k not in ('tract_id', 'state', 'lat', 'lon')}
    return (c['pop_white'] + c['pop_black'] + c['pop_aapi'] + c['pop_other'] == c['pop_total']
            and c['pop_hispanic'] + c['pop_non_hispanic'] == c['pop_total']
            and c['hh_lt_35k'] + c['hh_gt_100k'] <= c['households_total'])


tracts = {r['tract_id']: r for r in csv.DictReader(open('tracts.csv')) if ok_counts(r)}
svi = {r['tract_id']: float(r['rpl_themes']) for r in csv.DictReader(open('svi.csv'))}


def facilities(path):
    return {r['facility_id']: r for r in csv.DictReader(open(path))
            if r['role'] == 'retail' and r['geocode_quality'] != 'failed'}


SETS = {'pharm': facilities('pharm.csv'), 'dg': facilities('dg.csv')}


def w(t, g):
    return int(t[FIELD.get(g, g)])


def distances(names, conus=False):
    out = {}
    for tid, t in sorted(tracts.items()):
        if conus and t['state'] in ('AK', 'HI', 'PR', 'VI', 'GU', 'MP', 'AS'):
            continue
        best = None
        for n in names:
            for fid, f in SETS[n].items():
                if f['state'] != t['state']:
                    continue
                d = hav((float(t['lat']), float(t['lon'])), (float(f['lat']), float(f['lon'])))
                if best is None or (d, fid) < best:
                    best = (d, fid)
        out[tid] = best
    return out


def shares(D, g, state=None):
    ids = [t for t in D if state is None or tracts[t]['state'] == state]
    tot = sum(w(tracts[t], g) for t in ids)
    if tot == 0:
        return None, 0
    return [100 * sum(w(tracts[t], g) for t in ids if D[t] and D[t][0] < x) / tot for x in TH], tot


def f2(x):
    return '' if x is None else f'{x:.2f}'


def coverage(D, label):
    nat = ['group,scope,lt_1,lt_2,lt_5,weighted_total']
    st = ['group,scope,lt_1,lt_2,lt_5,weighted_total']
    for g in GROUPS:
        s, tot = shares(D, g)
        nat.append(','.join([g, label] + [f2(v) for v in (s or [None] * 3)] + [str(tot)]))
    for state in sorted({tracts[t]['state'] for t in D}):
        for g in GROUPS:
            s, tot = shares(D, g, state)
            st.append(','.join([g, state] + [f2(v) for v in (s or [None] * 3)] + [str(tot)]))
    return '\n'.join(nat) + '\n', '\n'.join(st) + '\n'


def goal(D):
    s, _ = shares(D, 'all_adults')
    share = s[2]
    return f"goal all_adults <5 mi: {share:.2f}% vs target 90% -> {'met' if share >= 90 else 'not met'}\n"


def write(name, text):
    open('expected/' + name, 'w').write(text)


base = distances(['pharm'])
aug = distances(['pharm', 'dg'])
for tag, D in [('pharm', base), ('pharm_dg', aug)]:
    nat, st = coverage(D, 'US')
    write(f'{tag}.coverage.csv', nat)
    write(f'{tag}.coverage_by_state.csv', st)
    write(f'{tag}.goal.txt', goal(D))
    write(f'{tag}.distances.csv', 'tract_id,state,facility_id,miles\n' + ''.join(
        f"{t},{tracts[t]['state']},{D[t][1] if D[t] else ''},{repr(D[t][0]) if D[t] else ''}\n" for t in D))
nat, _ = coverage(distances(['pharm'], conus=True), 'CONUS')
write('pharm_conus.coverage.csv', nat)

lines = ['group,threshold,base,augmented,delta']
for g in GROUPS:
    b, _ = shares(base, g)
    a, _ = shares(aug, g)
    for i, x in enumerate(TH):
        lines.append(f'{g},{x:g},{b[i]:.2f},{a[i]:.2f},{a[i] - b[i]:.2f}')
write('delta.csv', '\n'.join(lines) + '\n')


def hist(names):
    counts = [0] * 10
    unmatched = 0
    for n in names:
        for fid, f in SETS[n].items():
            p = (float(f['lat']), float(f['lon']))
            cands = [t for t in tracts if tracts[t]['state'] == f['state']] or list(tracts)
            tid = min(cands, key=lambda t: (hav(p, (float(tracts[t]['lat']), float(tracts[t]['lon']))), t))
            v = svi.get(tid, -999)
            if v == -999:
                unmatched += 1
            else:
                counts[min(int(math.floor(v * 10)), 9)] += 1
    base = sum(counts)
    rows = ['bin,count,share'] + [f'{k + 1},{c},{(100 * c / base if base else 0.0):.2f}' for k, c in enumerate(counts)]
    rows.append(f'unmatched,{unmatched},')
    return '\n'.join(rows) + '\n'


write('pharm.svi_deciles.csv', hist(['pharm']))
write('pharm_dg.svi_deciles.csv', hist(['pharm', 'dg']))
