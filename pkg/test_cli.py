import os
import sys
import json
import logging

import pytest

# Add the src directory to the Python path
sys.path.append(os.path.join(os.path.dirname(__file__), 'src'))

from main import main
from runtime_config import RuntimeConfig


def read_bytes(path):
    with open(path, 'rb') as f:
        return f.read()


@pytest.fixture(scope='module')
def simulated(tmp_path_factory):
    directory = tmp_path_factory.mktemp('sim')
    assert main(['simulate', '--n', '3000', '--p', '6', '--seed', '1', '--output', str(directory)]) == 0
    return directory


def write_csv(path, text):
    path.write_text(text, encoding='utf-8')
    return str(path)


def write_schema(path, schema):
    path.write_text(json.dumps(schema), encoding='utf-8')
    return str(path)


class TestSimulate:
    def test_writes_data_and_schema(self, simulated):
        assert (simulated / 'data_1.csv').exists()
        schema = json.loads((simulated / 'schema.json').read_text())
        assert schema['target'] == 'Y'
        assert [c['name'] for c in schema['columns']][:3] == ['X1', 'X2', 'X3']

    def test_rerun_is_byte_identical(self, simulated, tmp_path):
        assert main(['simulate', '--n', '3000', '--p', '6', '--seed', '1', '--output', str(tmp_path)]) == 0
        assert read_bytes(tmp_path / 'data_1.csv') == read_bytes(simulated / 'data_1.csv')

    def test_replicates_use_consecutive_seeds(self, tmp_path):
        assert main(['simulate', '--n', '50', '--p', '4', '--seed', '7', '--reps', '3',
                     '--output', str(tmp_path)]) == 0
        names = sorted(p.name for p in tmp_path.glob('data_*.csv'))
        assert names == ['data_7.csv', 'data_8.csv', 'data_9.csv']
        assert read_bytes(tmp_path / 'data_7.csv') != read_bytes(tmp_path / 'data_8.csv')

    def test_too_few_predictors(self, tmp_path):
        assert main(['simulate', '--n', '50', '--p', '2', '--output', str(tmp_path)]) == 1


class TestAnalyze:
    def analyze(self, simulated, output, *extra):
        return main(['analyze', '--input', str(simulated / 'data_1.csv'),
                     '--schema', str(simulated / 'schema.json'), '--output', str(output), *extra])

    def test_happy_path(self, simulated, tmp_path, capsys):
        code = self.analyze(simulated, tmp_path, '--partitions', '8', '--seed', '42',
                            '--method', 'reml', '--m', '4', '--ci', '0.95', '--workers', '1')
        assert code == 0
        report = json.loads((tmp_path / 'report.json').read_text())
        assert report['partitioning'] == {'scheme': 'random', 'k': 8,
                                          'sizes': report['partitioning']['sizes']}
        assert sum(report['partitioning']['sizes']) == 3000
        first = report['variables'][0]
        assert first['rank'] == 1
        assert {'j', 'lp', 'se', 'ci_low', 'ci_high', 'p_value', 'q', 'i2_pre', 'i2_post',
                'tau2', 'k_eff'} <= set(first['orders'][0])
        header = (tmp_path / 'report.csv').read_text().splitlines()[0]
        assert header == 'variable,rank,j,lp,se,ci_lo,ci_hi,p_value,q,i2_pre,i2_post,tau2,k_eff'
        assert 'MetaLP ranking' in capsys.readouterr().out

    def test_report_identical_across_workers(self, simulated, tmp_path):
        outputs = []
        for workers in ('1', '4', '8'):
            output = tmp_path / f'w{workers}'
            assert self.analyze(simulated, output, '--partitions', '10', '--seed', '3',
                                '--workers', workers) == 0
            outputs.append(output)
        for name in ('report.json', 'report.csv'):
            contents = {read_bytes(output / name) for output in outputs}
            assert len(contents) == 1

    def test_gamma_sets_partition_count(self, simulated, tmp_path):
        assert self.analyze(simulated, tmp_path, '--gamma', '0.4', '--workers', '1') == 0
        report = json.loads((tmp_path / 'report.json').read_text())
        assert report['partitioning']['k'] == 25

    def test_emit_plan(self, simulated, tmp_path):
        plan_path = tmp_path / 'plans' / 'plan.json'
        assert self.analyze(simulated, tmp_path, '--partitions', '4', '--workers', '1',
                            '--emit-plan', str(plan_path)) == 0
        plan = json.loads(plan_path.read_text())
        assert plan['k'] == 4
        assert plan['generator'] == 'numpy.random.Philox'
        assert len(plan['assignment']) == 3000

    def test_partition_by_column(self, tmp_path):
        rows = ['site,x,y']
        for i in range(400):
            rows.append(f"{'north' if i % 3 else 'south'},{(i * 37) % 101},{(i * 7) % 2}")
        csv_path = write_csv(tmp_path / 'd.csv', '\n'.join(rows) + '\n')
        schema_path = write_schema(tmp_path / 's.json', {
            'target': 'y',
            'columns': [{'name': 'site', 'type': 'ignore'},
                        {'name': 'x', 'type': 'continuous', 'm': 2},
                        {'name': 'y', 'type': 'binary'}]})
        code = main(['analyze', '--input', csv_path, '--schema', schema_path,
                     '--partition-by', 'site', '--workers', '1', '--output', str(tmp_path / 'out')])
        assert code == 0
        report = json.loads((tmp_path / 'out' / 'report.json').read_text())
        assert report['partitioning']['scheme'] == 'by_column'
        assert report['partitioning']['k'] == 2
        orders = report['variables'][0]['orders']
        assert len(orders) == 2
        assert all('i2_post' in order for order in orders)

    def test_schema_missing_column(self, tmp_path, capsys):
        csv_path = write_csv(tmp_path / 'd.csv', 'a,b,y\n1,2,0\n3,4,1\n')
        schema_path = write_schema(tmp_path / 's.json', {
            'target': 'y', 'columns': [{'name': 'a'}, {'name': 'y', 'type': 'binary'}]})
        code = main(['analyze', '--input', csv_path, '--schema', schema_path, '--partitions', '2',
                     '--output', str(tmp_path / 'out')])
        assert code == 1
        assert "'b'" in capsys.readouterr().err

    def test_non_binary_target(self, tmp_path, capsys):
        csv_path = write_csv(tmp_path / 'd.csv', 'a,y\n1,0\n2,1\n3,2\n')
        schema_path = write_schema(tmp_path / 's.json', {
            'target': 'y', 'columns': [{'name': 'a'}, {'name': 'y', 'type': 'binary'}]})
        code = main(['analyze', '--input', csv_path, '--schema', schema_path, '--partitions', '2',
                     '--output', str(tmp_path / 'out')])
        assert code == 1
        assert "'y'" in capsys.readouterr().err

    def test_text_column_declared_continuous(self, tmp_path, capsys):
        csv_path = write_csv(tmp_path / 'd.csv', 'a,y\n1,0\nhigh,1\n3,1\n')
        schema_path = write_schema(tmp_path / 's.json', {
            'columns': [{'name': 'a', 'type': 'continuous'},
                        {'name': 'y', 'type': 'binary', 'target': True}]})
        code = main(['analyze', '--input', csv_path, '--schema', schema_path, '--partitions', '2',
                     '--output', str(tmp_path / 'out')])
        assert code == 1
        assert "'a'" in capsys.readouterr().err

    def test_unreadable_input(self, tmp_path):
        schema_path = write_schema(tmp_path / 's.json', {
            'target': 'y', 'columns': [{'name': 'y', 'type': 'binary'}]})
        code = main(['analyze', '--input', str(tmp_path / 'absent.csv'), '--schema', schema_path,
                     '--partitions', '2', '--output', str(tmp_path / 'out')])
        assert code == 1

    def test_conflicting_partition_flags(self, simulated, tmp_path):
        with pytest.raises(SystemExit) as info:
            self.analyze(simulated, tmp_path, '--partitions', '4', '--gamma', '0.4')
        assert info.value.code == 2

    def test_partition_flag_required(self, simulated, tmp_path, capsys):
        with pytest.raises(SystemExit) as info:
            self.analyze(simulated, tmp_path, '--workers', '1')
        assert info.value.code == 2
        assert not (tmp_path / 'report.json').exists()
        assert '--partitions' in capsys.readouterr().err

    def test_group_by_with_partition_by(self, simulated, tmp_path):
        with pytest.raises(SystemExit) as info:
            self.analyze(simulated, tmp_path, '--partition-by', 'X3', '--group-by', 'X2')
        assert info.value.code == 2


class TestDemo:
    def test_berkeley(self, tmp_path, capsys):
        assert main(['demo', 'berkeley', '--output', str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert 'p-value for H0: LP <= 0 is 0.8' in out
        document = json.loads((tmp_path / 'berkeley.json').read_text())
        assert document['p_value'] == pytest.approx(0.81, abs=0.03)

    def test_berkeley_method_flag(self, tmp_path):
        assert main(['demo', 'berkeley', '--method', 'dl', '--output', str(tmp_path)]) == 0
        document = json.loads((tmp_path / 'berkeley.json').read_text())
        assert document['method'] == 'dl'
        assert document['combined']['method'] == 'dl'

    def test_stein(self, tmp_path, capsys):
        assert main(['demo', 'stein', '--output', str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert 'MSE ratio: MetaLP 0.293, James-Stein 0.283' in out
        assert 'Clemente' in out

    def test_unknown_demo(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as info:
            main(['demo', 'nosuch', '--output', str(tmp_path)])
        assert info.value.code == 2
        assert 'berkeley' in capsys.readouterr().err


class TestRuntimeConfig:
    def test_workers_fall_back_to_environment(self, monkeypatch):
        monkeypatch.setenv('METALP_WORKERS', '3')
        runtime = RuntimeConfig()
        assert runtime.resolve_workers(None) == 3
        assert runtime.resolve_workers(6) == 6

    def test_invalid_environment_values(self, monkeypatch):
        monkeypatch.setenv('METALP_WORKERS', 'many')
        monkeypatch.setenv('METALP_DEFAULT_METHOD', 'bayes')
        runtime = RuntimeConfig()
        assert runtime.workers is None
        assert runtime.default_method.value == 'reml'
        assert runtime.resolve_workers(None) >= 1

    def test_setup_logging_is_idempotent(self):
        runtime = RuntimeConfig()
        root = runtime.setup_logging('DEBUG')
        count = len(root.handlers)
        runtime.setup_logging('INFO')
        assert len(root.handlers) == count
        assert root.level == logging.INFO
